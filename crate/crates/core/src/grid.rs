use core::ops::Range;

use crate::error::FdaError;

/// Equally spaced evaluation grid on `[lo, hi]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> crate::Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FdaError::InvalidConfig(alloc::format!(
                "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n_points < 2 {
            return Err(FdaError::InvalidConfig(alloc::format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(GridSpec { lo, hi, n_points })
    }

    /// 101 points on `[0, 1]`.
    pub fn unit_curve() -> Self {
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            n_points: 101,
        }
    }

    /// 51 points per axis on `[0, 1]`.
    pub fn unit_surface() -> Self {
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            n_points: 51,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.width() / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.hi
        } else {
            self.lo + self.width() * i as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// Indices of grid points within distance `h` of `center` (a superset is
    /// fine: kernel weights vanish outside the window).
    pub fn window(&self, center: f64, h: f64) -> Range<usize> {
        let step = self.spacing();
        let a = libm::floor((center - h - self.lo) / step);
        let b = libm::ceil((center + h - self.lo) / step);
        let last = (self.n_points - 1) as f64;
        if b < 0.0 || a > last {
            return 0..0;
        }
        let a = if a < 0.0 { 0 } else { a as usize };
        let b = if b > last {
            self.n_points - 1
        } else {
            b as usize
        };
        a..b + 1
    }

    /// Indices `i` with `point(i)` inside `[lo + delta, hi - delta]`.
    pub fn trimmed(&self, delta: f64) -> Range<usize> {
        let a = self.lo + delta;
        let b = self.hi - delta;
        let mut start = 0;
        while start < self.n_points && self.point(start) < a - 1e-12 {
            start += 1;
        }
        let mut end = self.n_points;
        while end > start && self.point(end - 1) > b + 1e-12 {
            end -= 1;
        }
        start..end
    }

    /// Linear interpolation of grid values at `t`, clamped at the ends.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let pos = (t - self.lo) / self.spacing();
        if pos <= 0.0 {
            return values[0];
        }
        let last = self.n_points - 1;
        if pos >= last as f64 {
            return values[last];
        }
        let i = pos as usize;
        let frac = pos - i as f64;
        if frac == 0.0 {
            values[i]
        } else {
            values[i] * (1.0 - frac) + values[i + 1] * frac
        }
    }

    /// Bilinear interpolation of a row-major `n × n` array at `(s, t)`.
    pub fn interpolate2(&self, values: &[f64], s: f64, t: f64) -> f64 {
        let n = self.n_points;
        debug_assert_eq!(values.len(), n * n);
        let (i, fs) = self.locate(s);
        let (j, ft) = self.locate(t);
        let i1 = (i + 1).min(n - 1);
        let j1 = (j + 1).min(n - 1);
        let v00 = values[i * n + j];
        let v01 = values[i * n + j1];
        let v10 = values[i1 * n + j];
        let v11 = values[i1 * n + j1];
        (1.0 - fs) * ((1.0 - ft) * v00 + ft * v01) + fs * ((1.0 - ft) * v10 + ft * v11)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let pos = (t - self.lo) / self.spacing();
        if pos <= 0.0 {
            return (0, 0.0);
        }
        let last = self.n_points - 1;
        if pos >= last as f64 {
            return (last, 0.0);
        }
        let i = pos as usize;
        (i, pos - i as f64)
    }

    /// Trapezoid weights over the trimmed index range (zero elsewhere).
    pub fn trapezoid_weights(&self, delta: f64) -> alloc::vec::Vec<f64> {
        let mut w = alloc::vec![0.0; self.n_points];
        let r = self.trimmed(delta);
        if r.len() < 2 {
            return w;
        }
        let step = self.spacing();
        for i in r.clone() {
            w[i] = step;
        }
        w[r.start] = 0.5 * step;
        w[r.end - 1] = 0.5 * step;
        w
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::unit_curve()
    }
}
