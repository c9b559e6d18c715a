//! Compactly supported smoothing kernels on `[-1, 1]`.

use alloc::format;

use crate::error::FdaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelFamily {
    #[default]
    Epanechnikov,
    Quartic,
    Triweight,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Quartic => "quartic",
            KernelFamily::Triweight => "triweight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "epanechnikov" | "epan" => Some(KernelFamily::Epanechnikov),
            "quartic" | "biweight" => Some(KernelFamily::Quartic),
            "triweight" => Some(KernelFamily::Triweight),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            KernelFamily::Epanechnikov => 0,
            KernelFamily::Quartic => 1,
            KernelFamily::Triweight => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(KernelFamily::Epanechnikov),
            1 => Some(KernelFamily::Quartic),
            2 => Some(KernelFamily::Triweight),
            _ => None,
        }
    }

    /// Closed-form second moment `∫u²W(u)du`.
    pub fn second_moment(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 1.0 / 5.0,
            KernelFamily::Quartic => 1.0 / 7.0,
            KernelFamily::Triweight => 1.0 / 9.0,
        }
    }

    /// Closed-form roughness `∫W(u)²du`.
    pub fn roughness(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 3.0 / 5.0,
            KernelFamily::Quartic => 5.0 / 7.0,
            KernelFamily::Triweight => 350.0 / 429.0,
        }
    }

    #[inline]
    fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        let v = 1.0 - u * u;
        match self {
            KernelFamily::Epanechnikov => 0.75 * v,
            KernelFamily::Quartic => (15.0 / 16.0) * v * v,
            KernelFamily::Triweight => (35.0 / 32.0) * v * v * v,
        }
    }
}

/// A validated kernel together with its moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    alpha: f64,
    roughness: f64,
}

impl Kernel {
    /// Builds the kernel and checks its moments by composite Gauss-Legendre
    /// quadrature against the closed forms.
    pub fn new(family: KernelFamily) -> crate::Result<Self> {
        let mass = integrate(|u| family.eval(u));
        let alpha = integrate(|u| u * u * family.eval(u));
        let rough = integrate(|u| family.eval(u) * family.eval(u));
        let odd = integrate(|u| u * family.eval(u));
        if (mass - 1.0).abs() > 1e-10 || odd.abs() > 1e-10 {
            return Err(FdaError::KernelCheck(format!(
                "{} integrates to {mass} (first moment {odd})",
                family.name()
            )));
        }
        if (alpha - family.second_moment()).abs() > 1e-12
            || (rough - family.roughness()).abs() > 1e-12
        {
            return Err(FdaError::KernelCheck(format!(
                "{} moments alpha={alpha} R={rough} disagree with closed form",
                family.name()
            )));
        }
        Ok(Kernel {
            family,
            alpha: family.second_moment(),
            roughness: family.roughness(),
        })
    }

    pub fn epanechnikov() -> Self {
        Kernel {
            family: KernelFamily::Epanechnikov,
            alpha: 0.2,
            roughness: 0.6,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// `α(W) = ∫u²W(u)du`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `R(W) = ∫W(u)²du`.
    pub fn roughness(&self) -> f64 {
        self.roughness
    }

    /// `W(u)`, exactly zero outside `[-1, 1]`.
    #[inline]
    pub fn weight(&self, u: f64) -> f64 {
        self.family.eval(u)
    }

    /// `W_h(x) = W(x/h)/h`.
    #[inline]
    pub fn scaled(&self, x: f64, h: f64) -> f64 {
        self.family.eval(x / h) / h
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::epanechnikov()
    }
}

// 5-point Gauss-Legendre on 32 panels of [-1, 1].
fn integrate(f: impl Fn(f64) -> f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let panels = 32;
    let width = 2.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = -1.0 + width * p as f64;
        let mid = a + 0.5 * width;
        for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
            total += w * f(mid + 0.5 * width * x);
        }
    }
    total * 0.5 * width
}
