//! Plug-in bandwidth selection.
//!
//! The optimal bandwidth balances a curvature functional `θ` against a
//! variance functional `ν`. Both are tracked online by small pilot banks that
//! absorb every block the same way the main estimators do.

use alloc::vec;
use alloc::vec::Vec;

use crate::bank::CandidateBank;
use crate::block::Block;
use crate::counts::CountLedger;
use crate::error::FdaError;
use crate::grid::GridSpec;
use crate::kernel::Kernel;
use crate::linalg::DEFAULT_RIDGE;
use crate::smoother::{
    cubic_substats, fill_gaps, linear_substats, pair_substats, solve_curve, solve_surface, Design,
};

/// Which pilot functional a bandwidth or candidate sequence serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotKind {
    ThetaMu,
    NuMu,
    ThetaGamma,
    NuGamma,
}

impl PilotKind {
    /// Rate exponent `e` in `h = c · S^{−e}`; also the candidate exponent.
    pub fn exponent(self) -> f64 {
        match self {
            PilotKind::ThetaMu => 1.0 / 7.0,
            PilotKind::NuMu => 1.0 / 5.0,
            PilotKind::ThetaGamma => 1.0 / 8.0,
            PilotKind::NuGamma => 1.0 / 6.0,
        }
    }
}

/// The four pilot bandwidths at the current counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotBandwidths {
    pub theta_mu: f64,
    pub nu_mu: f64,
    pub theta_gamma: f64,
    pub nu_gamma: f64,
}

/// `G·S1^{−1/7}`, `R·S1^{−1/5}`, `G·S2^{−1/8}`, `R·S2^{−1/6}`.
pub fn pilot_bandwidths(s1: f64, s2: f64, g: f64, r: f64) -> PilotBandwidths {
    PilotBandwidths {
        theta_mu: g * libm::pow(s1, -PilotKind::ThetaMu.exponent()),
        nu_mu: r * libm::pow(s1, -PilotKind::NuMu.exponent()),
        theta_gamma: g * libm::pow(s2, -PilotKind::ThetaGamma.exponent()),
        nu_gamma: r * libm::pow(s2, -PilotKind::NuGamma.exponent()),
    }
}

/// `J` decreasing candidates for a pilot bandwidth.
pub fn pilot_candidates(h: f64, count: usize, kind: PilotKind) -> Vec<f64> {
    crate::bank::candidates(h, count, kind.exponent())
}

/// Admissible bandwidth range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthLimits {
    pub min: f64,
    pub max: f64,
}

impl BandwidthLimits {
    /// Two grid spacings up to half the domain width.
    pub fn for_grid(grid: &GridSpec) -> Self {
        BandwidthLimits {
            min: 2.0 * grid.spacing(),
            max: 0.5 * grid.width(),
        }
    }

    pub fn clamp(&self, h: f64) -> f64 {
        if h.is_nan() {
            return self.max;
        }
        h.clamp(self.min, self.max)
    }
}

/// Unclamped plug-in rule `(ν / (α² θ))^{1/(d+4)} · S^{−1/(d+4)}`.
pub fn plug_in(theta: f64, nu: f64, count: f64, d: usize, alpha: f64) -> f64 {
    let e = 1.0 / (d as f64 + 4.0);
    libm::pow(nu / (alpha * alpha * theta), e) * libm::pow(count, -e)
}

/// Plug-in rule clamped to `limits`.
pub fn online_bandwidth(
    theta: f64,
    nu: f64,
    count: f64,
    d: usize,
    kernel: &Kernel,
    limits: &BandwidthLimits,
) -> f64 {
    limits.clamp(plug_in(theta, nu, count, d, kernel.alpha()))
}

/// Coefficients of the relative-efficiency lower bound
/// `(1 + c_lin/L + c_quad/L²)^{−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub d: usize,
    pub c_lin: f64,
    pub c_quad: f64,
}

impl BoundConstants {
    pub fn for_dim(d: usize) -> crate::Result<Self> {
        match d {
            1 => Ok(BoundConstants {
                d,
                c_lin: 0.1831,
                c_quad: 0.0032,
            }),
            2 => Ok(BoundConstants {
                d,
                c_lin: 0.2422,
                c_quad: 0.0190,
            }),
            _ => Err(FdaError::InvalidConfig("dimension must be 1 or 2".into())),
        }
    }
}

/// Lower bound on the efficiency of an `L`-slot online estimator relative
/// to the full-data estimator.
pub fn efficiency_lower_bound(slots: usize, d: usize) -> crate::Result<f64> {
    if slots == 0 {
        return Err(FdaError::InvalidConfig("L must be at least 1".into()));
    }
    let c = BoundConstants::for_dim(d)?;
    let l = slots as f64;
    Ok(1.0 / (1.0 + c.c_lin / l + c.c_quad / (l * l)))
}

/// Measurement regime declared by the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignMode {
    #[default]
    Sparse,
    Dense,
}

impl DesignMode {
    pub fn name(self) -> &'static str {
        match self {
            DesignMode::Sparse => "sparse",
            DesignMode::Dense => "dense",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sparse" => Some(DesignMode::Sparse),
            "dense" => Some(DesignMode::Dense),
            _ => None,
        }
    }
}

/// Tuning constants of the pilot estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConstants {
    pub g_mu: f64,
    pub r_mu: f64,
    pub g_gamma: f64,
    pub r_gamma: f64,
    /// Candidates per mean pilot bank.
    pub j_mean: usize,
    /// Candidates per covariance pilot bank.
    pub j_cov: usize,
    /// Stop updating mean pilots after this block (0 = never).
    pub freeze_mean_after: u64,
    /// Stop updating covariance pilots after this block (0 = never).
    pub freeze_cov_after: u64,
    pub theta_floor: f64,
    pub nu_floor: f64,
    /// Trim fraction of the domain width removed from each end before
    /// integrating.
    pub trim: f64,
    /// Per-subject pre-smoothing bandwidth is `scale · range · m^{−1/5}`.
    pub presmooth_scale: f64,
}

impl PilotConstants {
    /// Defaults for an `L`-slot estimator.
    pub fn for_slots(l: usize) -> Self {
        let half_sqrt = libm::sqrt(0.5);
        PilotConstants {
            g_mu: 0.5,
            r_mu: 0.5,
            g_gamma: half_sqrt,
            r_gamma: half_sqrt,
            j_mean: l.max(1),
            j_cov: 3,
            freeze_mean_after: 0,
            freeze_cov_after: 200,
            theta_floor: 1e-4,
            nu_floor: 1e-4,
            trim: 0.05,
            presmooth_scale: 0.25,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let pos = [
            self.g_mu,
            self.r_mu,
            self.g_gamma,
            self.r_gamma,
            self.theta_floor,
            self.nu_floor,
            self.presmooth_scale,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(FdaError::InvalidConfig(
                "pilot constants must be positive".into(),
            ));
        }
        if self.j_mean == 0 || self.j_cov == 0 {
            return Err(FdaError::InvalidConfig("J must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(FdaError::InvalidConfig("trim must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

impl Default for PilotConstants {
    fn default() -> Self {
        Self::for_slots(5)
    }
}

/// Online pilot estimates and the banks that back them.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotState {
    pub constants: PilotConstants,
    pub mode: DesignMode,
    pub theta_mu: f64,
    pub nu_mu: f64,
    pub theta_gamma: f64,
    pub nu_gamma: f64,
    pub sigma2: f64,
    pub(crate) curve_grid: GridSpec,
    pub(crate) surface_grid: GridSpec,
    /// Local-cubic bank for the second derivative of the mean.
    pub(crate) cubic: CandidateBank,
    /// Auxiliary local-linear mean.
    pub(crate) aux: CandidateBank,
    /// Smoothed squared residuals of the auxiliary mean.
    pub(crate) resid: CandidateBank,
    /// Auxiliary covariance surface.
    pub(crate) gamma_check: CandidateBank,
    /// Smoothed squared deviations of raw covariances.
    pub(crate) spread: CandidateBank,
    /// Local-quadratic surface bank for second derivatives.
    pub(crate) curv2: CandidateBank,
    /// Latest residual-variance curve and design density on the curve grid.
    pub(crate) r_curve: Vec<f64>,
    pub(crate) f_curve: Vec<f64>,
    /// Latest auxiliary surface and spread surface on the surface grid.
    pub(crate) gamma_surface: Vec<f64>,
    pub(crate) spread_surface: Vec<f64>,
    pub(crate) mean_updates: u64,
    pub(crate) cov_updates: u64,
}

impl PilotState {
    pub fn new(
        constants: PilotConstants,
        mode: DesignMode,
        curve_grid: GridSpec,
        surface_grid: GridSpec,
    ) -> crate::Result<Self> {
        constants.validate()?;
        let nc = curve_grid.len();
        let ns = surface_grid.len();
        let jm = constants.j_mean;
        let jc = constants.j_cov;
        Ok(PilotState {
            constants,
            mode,
            theta_mu: constants.theta_floor,
            nu_mu: constants.nu_floor,
            theta_gamma: constants.theta_floor,
            nu_gamma: constants.nu_floor,
            sigma2: 0.0,
            curve_grid,
            surface_grid,
            cubic: CandidateBank::new(Design::Cubic1D, nc, jm, PilotKind::ThetaMu.exponent())?,
            aux: CandidateBank::new(Design::Linear1D, nc, jm, PilotKind::NuMu.exponent())?,
            resid: CandidateBank::new(Design::Linear1D, nc, jm, PilotKind::NuMu.exponent())?,
            gamma_check: CandidateBank::new(
                Design::Linear2D,
                ns,
                jc,
                PilotKind::NuGamma.exponent(),
            )?,
            spread: CandidateBank::new(Design::Linear2D, ns, jc, PilotKind::NuGamma.exponent())?,
            curv2: CandidateBank::new(
                Design::Quadratic2D,
                ns,
                jc,
                PilotKind::ThetaGamma.exponent(),
            )?,
            r_curve: vec![0.0; nc],
            f_curve: vec![0.0; nc],
            gamma_surface: vec![0.0; ns * ns],
            spread_surface: vec![0.0; ns * ns],
            mean_updates: 0,
            cov_updates: 0,
        })
    }

    pub fn curve_grid(&self) -> &GridSpec {
        &self.curve_grid
    }

    pub fn surface_grid(&self) -> &GridSpec {
        &self.surface_grid
    }

    /// Residual-variance curve `r̃(t)` from the latest update.
    pub fn residual_variance(&self) -> &[f64] {
        &self.r_curve
    }

    /// Design density estimate on the curve grid.
    pub fn density(&self) -> &[f64] {
        &self.f_curve
    }

    /// Auxiliary covariance surface used by the variance pilot.
    pub fn pilot_surface(&self) -> &[f64] {
        &self.gamma_surface
    }

    /// Smoothed squared deviation of raw covariances from the auxiliary
    /// surface: the pointwise variance `Ṽ1(s, t)` of the raw covariances.
    pub fn spread_surface(&self) -> &[f64] {
        &self.spread_surface
    }

    pub fn mean_frozen(&self, block_index: u64) -> bool {
        let k = self.constants.freeze_mean_after;
        k > 0 && block_index > k
    }

    pub fn cov_frozen(&self, block_index: u64) -> bool {
        let k = self.constants.freeze_cov_after;
        k > 0 && block_index > k
    }

    /// Plug-in bandwidth for the mean at the ledger's counts.
    pub fn mean_bandwidth(&self, ledger: &CountLedger, kernel: &Kernel) -> f64 {
        online_bandwidth(
            self.theta_mu,
            self.nu_mu,
            ledger.total(1).max(1.0),
            1,
            kernel,
            &BandwidthLimits::for_grid(&self.curve_grid),
        )
    }

    /// Plug-in bandwidth for the covariance at the ledger's counts.
    pub fn cov_bandwidth(&self, ledger: &CountLedger, kernel: &Kernel) -> f64 {
        online_bandwidth(
            self.theta_gamma,
            self.nu_gamma,
            ledger.total(2).max(1.0),
            2,
            kernel,
            &BandwidthLimits::for_grid(&self.surface_grid),
        )
    }

    fn pilot_h(&self, ledger: &CountLedger) -> PilotBandwidths {
        let c = &self.constants;
        let s1 = ledger.total(1).max(1.0);
        let s2 = ledger.total(2).max(1.0);
        let m = pilot_bandwidths(s1, s2, c.g_mu, c.r_mu);
        let g = pilot_bandwidths(s1, s2, c.g_gamma, c.r_gamma);
        let lc = BandwidthLimits::for_grid(&self.curve_grid);
        let ls = BandwidthLimits::for_grid(&self.surface_grid);
        PilotBandwidths {
            theta_mu: lc.clamp(m.theta_mu),
            nu_mu: lc.clamp(m.nu_mu),
            theta_gamma: ls.clamp(g.theta_gamma),
            nu_gamma: ls.clamp(g.nu_gamma),
        }
    }

    /// Absorbs a block into the mean pilots and refreshes `θ_μ`, `ν_μ` (and
    /// `σ²` in dense mode). `h_prev` is the previous mean bandwidth, used by
    /// the dense-design variance term. The ledger must already include the
    /// block.
    pub fn update_mean(
        &mut self,
        block: &Block,
        ledger: &CountLedger,
        kernel: &Kernel,
        h_prev: Option<f64>,
    ) -> crate::Result<()> {
        if self.mean_frozen(ledger.n_blocks) || ledger.last(1) == 0.0 {
            return Ok(());
        }
        let grid = self.curve_grid;
        let hp = self.pilot_h(ledger);
        let w = ledger.weight(1);
        let s = ledger.last(1);
        let values = block.values();

        self.cubic.absorb(hp.theta_mu, w, s, |h| {
            cubic_substats(block, &values, h, &grid, kernel)
        })?;
        if let Some(theta) = curvature_1d(
            self.cubic.leading(),
            &grid,
            ledger.total(1),
            self.constants.trim,
        ) {
            if theta.is_finite() {
                self.theta_mu = theta.max(self.constants.theta_floor);
            }
        }

        self.aux.absorb(hp.nu_mu, w, s, |h| {
            linear_substats(block, &values, h, &grid, kernel)
        })?;
        if let Ok((mu_check, _)) = solve_curve(self.aux.leading(), DEFAULT_RIDGE) {
            let sq = block.map_values(|t, y| {
                let e = y - grid.interpolate(&mu_check, t);
                e * e
            });
            self.resid.absorb(hp.nu_mu, w, s, |h| {
                linear_substats(block, &sq, h, &grid, kernel)
            })?;
            if let Ok((r, _)) = solve_curve(self.resid.leading(), DEFAULT_RIDGE) {
                let s1 = ledger.total(1);
                self.r_curve = r;
                for (g, f) in self.f_curve.iter_mut().enumerate() {
                    *f = self.resid.leading().mass(g) / s1;
                }
            }
        }

        if self.mode == DesignMode::Dense {
            self.update_sigma2_dense(block, ledger, kernel);
        }
        self.mean_updates += 1;
        self.refresh_nu_mu(ledger, kernel, h_prev);
        Ok(())
    }

    /// Recomputes `ν_μ` from the stored residual-variance curve and density.
    /// In dense mode the cross term uses `ρ = S2 · h_prev / S1`, or zero when
    /// there is no previous bandwidth.
    pub fn refresh_nu_mu(&mut self, ledger: &CountLedger, kernel: &Kernel, h_prev: Option<f64>) {
        if self.mean_updates == 0 && self.r_curve.iter().all(|&r| r == 0.0) {
            return;
        }
        let weights = self
            .curve_grid
            .trapezoid_weights(self.constants.trim * self.curve_grid.width());
        let mut nu = 0.0;
        for (w, r) in weights.iter().zip(&self.r_curve) {
            nu += w * r;
        }
        nu *= kernel.roughness();
        if self.mode == DesignMode::Dense {
            if let Some(h) = h_prev {
                let s1 = ledger.total(1);
                let rho = if s1 > 0.0 {
                    ledger.total(2) * h / s1
                } else {
                    0.0
                };
                let mut cross = 0.0;
                for ((w, r), f) in weights.iter().zip(&self.r_curve).zip(&self.f_curve) {
                    cross += w * (r - self.sigma2) * f;
                }
                nu += rho * cross;
            }
        }
        if nu.is_finite() {
            self.nu_mu = nu.max(self.constants.nu_floor);
        }
    }

    /// Running noise-variance estimate from per-subject pre-smoothing. Only
    /// subjects with at least four measurements contribute.
    pub fn update_sigma2_dense(&mut self, block: &Block, ledger: &CountLedger, kernel: &Kernel) {
        let s1 = ledger.total(1);
        let s_prev = s1 - ledger.last(1);
        if s1 <= 0.0 {
            return;
        }
        let sum = presmoothed_residual_ss(block, kernel, self.constants.presmooth_scale);
        self.sigma2 = sum / s1 + (s_prev / s1) * self.sigma2;
    }

    /// Absorbs a block's raw covariances into the covariance pilots and
    /// refreshes `θ_γ`, `ν_γ` (and `σ²` in sparse mode). `residuals` are the
    /// block's measurements centred by the current mean estimate; the mean
    /// pilots must already have seen the block.
    pub fn update_cov(
        &mut self,
        block: &Block,
        residuals: &[Vec<f64>],
        ledger: &CountLedger,
        kernel: &Kernel,
    ) -> crate::Result<()> {
        block.check_aligned(residuals)?;
        if self.cov_frozen(ledger.n_blocks) || ledger.last(2) == 0.0 {
            return Ok(());
        }
        let grid = self.surface_grid;
        let hp = self.pilot_h(ledger);
        let w = ledger.weight(2);
        let s = ledger.last(2);
        let raw = |i: usize, j1: usize, j2: usize| residuals[i][j1] * residuals[i][j2];

        self.gamma_check.absorb(hp.nu_gamma, w, s, |h| {
            pair_substats(Design::Linear2D, block, h, &grid, kernel, raw)
        })?;
        let gamma = match solve_surface(self.gamma_check.leading(), DEFAULT_RIDGE) {
            Ok((g, _)) => g,
            Err(_) => return Ok(()),
        };
        if self.mode == DesignMode::Sparse {
            self.sigma2 = sparse_sigma2(
                &self.r_curve,
                &self.curve_grid,
                &gamma,
                &grid,
                self.constants.trim,
            );
        }

        self.spread.absorb(hp.nu_gamma, w, s, |h| {
            pair_substats(Design::Linear2D, block, h, &grid, kernel, |i, j1, j2| {
                let subj = &block.subjects[i];
                let d = raw(i, j1, j2) - grid.interpolate2(&gamma, subj.times[j1], subj.times[j2]);
                d * d
            })
        })?;
        self.curv2.absorb(hp.theta_gamma, w, s, |h| {
            pair_substats(Design::Quadratic2D, block, h, &grid, kernel, raw)
        })?;

        if let Some(theta) = curvature_2d(
            self.curv2.leading(),
            &grid,
            ledger.total(2),
            self.constants.trim,
        ) {
            if theta.is_finite() {
                self.theta_gamma = theta.max(self.constants.theta_floor);
            }
        }
        self.gamma_surface = gamma;
        if let Ok((v, _)) = solve_surface(self.spread.leading(), DEFAULT_RIDGE) {
            self.spread_surface = v;
        }
        self.cov_updates += 1;
        let nu = self.cov_variance_functional(ledger, kernel);
        if nu.is_finite() {
            self.nu_gamma = nu.max(self.constants.nu_floor);
        }
        Ok(())
    }

    /// `ν_γ` from the stored pilot surfaces. The smoothed squared deviation
    /// of raw covariances estimates `V1` directly; dense mode adds the
    /// `V2`, `V3` terms with `C1` from one fixed-point step.
    fn cov_variance_functional(&self, ledger: &CountLedger, kernel: &Kernel) -> f64 {
        let grid = &self.surface_grid;
        let n = grid.len();
        let ws = grid.trapezoid_weights(self.constants.trim * grid.width());
        let r = kernel.roughness();
        let v1 = &self.spread_surface;
        let mut sparse = 0.0;
        for i in 0..n {
            for j in 0..n {
                sparse += ws[i] * ws[j] * v1[i * n + j];
            }
        }
        sparse *= r * r;
        if self.mode == DesignMode::Sparse {
            return sparse;
        }
        let (s2, s3, s4) = (ledger.total(2), ledger.total(3), ledger.total(4));
        if !(s3 > 0.0 && s4 > 0.0) {
            return sparse;
        }
        let alpha = kernel.alpha();
        let c1 = libm::pow(
            sparse.max(self.constants.nu_floor) / (alpha * alpha * self.theta_gamma),
            1.0 / 6.0,
        );
        let c0 = s2 * s4 / (s3 * s3);
        let g = &self.gamma_surface;
        let sig2 = self.sigma2;
        let f: Vec<f64> = (0..n)
            .map(|i| self.curve_grid.interpolate(&self.f_curve, grid.point(i)))
            .collect();
        let fourth = |i: usize, j: usize| {
            v1[i * n + j] + g[i * n + j] * g[i * n + j]
                - sig2 * (g[i * n + i] + g[j * n + j])
                - sig2 * sig2
        };
        let v2 =
            |i: usize, j: usize| fourth(i, j) + sig2 * g[j * n + j] - g[i * n + j] * g[i * n + j];
        let mut t2 = 0.0;
        let mut t3 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = ws[i] * ws[j];
                if w == 0.0 {
                    continue;
                }
                t2 += w * (f[i] * v2(j, i) + f[j] * v2(i, j));
                t3 += w * (fourth(i, j) - g[i * n + j] * g[i * n + j]) * f[i] * f[j];
            }
        }
        sparse + r * c1 / libm::sqrt(c0) * t2 + c1 * c1 * t3
    }
}

/// `∫ (μ'')² f` over the trimmed grid from local-cubic statistics; `None`
/// when no grid point is solvable.
pub(crate) fn curvature_1d(
    stats: &crate::smoother::LocalStats,
    grid: &GridSpec,
    s1: f64,
    trim: f64,
) -> Option<f64> {
    let n = grid.len();
    let range = grid.trimmed(trim * grid.width());
    let mut d2 = vec![0.0; n];
    let mut ok = vec![false; n];
    for g in range.clone() {
        if let Ok(fit) = stats.solve(g, DEFAULT_RIDGE) {
            d2[g] = 2.0 * fit.coeffs()[2];
            ok[g] = true;
        }
    }
    fill_gaps(&mut d2, &ok).ok()?;
    let weights = grid.trapezoid_weights(trim * grid.width());
    let mut theta = 0.0;
    for g in range {
        theta += weights[g] * d2[g] * d2[g] * stats.mass(g) / s1;
    }
    Some(theta)
}

/// Sum of squared de-biased, leverage-corrected pre-smoothing residuals.
pub(crate) fn presmoothed_residual_ss(block: &Block, kernel: &Kernel, scale: f64) -> f64 {
    let mut total = 0.0;
    let mut resid = Vec::new();
    for subj in &block.subjects {
        let m = subj.len();
        if m < 4 {
            continue;
        }
        let lo = subj.times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = subj.times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        let h = scale * range * libm::pow(m as f64, -0.2);
        resid.clear();
        for j in 0..m {
            let tj = subj.times[j];
            let mut p = [0.0; 3];
            for &tl in &subj.times {
                let u = tl - tj;
                let w = kernel.scaled(u, h);
                p[0] += w;
                p[1] += w * u;
                p[2] += w * u * u;
            }
            // Equivalent-kernel weight of each point in the fit at tj.
            let det = p[0] * p[2] - p[1] * p[1];
            let (mut fit, mut lev, mut sumsq) = (0.0, 0.0, 0.0);
            if det > 1e-12 * p[0] * p[2] && det > 0.0 {
                for (l, (&tl, &yl)) in subj.times.iter().zip(&subj.values).enumerate() {
                    let u = tl - tj;
                    let wl = kernel.scaled(u, h) * (p[2] - p[1] * u) / det;
                    fit += wl * yl;
                    sumsq += wl * wl;
                    if l == j {
                        lev = wl;
                    }
                }
            } else {
                fit = subj.values[j];
                lev = 1.0;
                sumsq = 1.0;
            }
            let factor = 1.0 - 2.0 * lev + sumsq;
            if factor > 1e-8 {
                resid.push(((subj.values[j] - fit) / libm::sqrt(factor), true));
            } else {
                resid.push((0.0, false));
            }
        }
        let used: Vec<f64> = resid.iter().filter(|r| r.1).map(|r| r.0).collect();
        if used.is_empty() {
            continue;
        }
        let mean = used.iter().sum::<f64>() / used.len() as f64;
        total += used.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>();
    }
    total
}

/// `∫∫ (∂²γ/∂s² + ∂²γ/∂t²)² f f` over the trimmed square from
/// local-quadratic surface statistics.
pub(crate) fn curvature_2d(
    stats: &crate::smoother::LocalStats,
    grid: &GridSpec,
    s2: f64,
    trim: f64,
) -> Option<f64> {
    let n = grid.len();
    let range = grid.trimmed(trim * grid.width());
    let ws = grid.trapezoid_weights(trim * grid.width());
    let mut lap = vec![0.0; n * n];
    let mut ok = vec![false; n * n];
    for i in range.clone() {
        for j in range.clone() {
            if let Ok(fit) = stats.solve(i * n + j, DEFAULT_RIDGE) {
                let c = fit.coeffs();
                lap[i * n + j] = 2.0 * c[3] + 2.0 * c[5];
                ok[i * n + j] = true;
            }
        }
    }
    crate::smoother::fill_gaps_2d(&mut lap, &ok, n).ok()?;
    let mut theta = 0.0;
    for i in range.clone() {
        for j in range.clone() {
            let g = i * n + j;
            theta += ws[i] * ws[j] * lap[g] * lap[g] * stats.mass(g) / s2;
        }
    }
    Some(theta)
}

/// Noise variance as the trimmed average of `r̃(t) − γ̌(t, t)`, clamped at
/// zero.
pub(crate) fn sparse_sigma2(
    r: &[f64],
    curve_grid: &GridSpec,
    gamma: &[f64],
    grid: &GridSpec,
    trim: f64,
) -> f64 {
    let n = grid.len();
    let range = grid.trimmed(trim * grid.width());
    if range.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in range.clone() {
        acc += curve_grid.interpolate(r, grid.point(i)) - gamma[i * n + i];
    }
    (acc / range.len() as f64).max(0.0)
}
