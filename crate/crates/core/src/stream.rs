//! The online estimator: one call to [`OnlineEstimator::step`] per block.

use alloc::vec::Vec;

use crate::bandwidth::{DesignMode, PilotConstants, PilotState};
use crate::bank::{CandidateBank, MatchPlan};
use crate::block::Block;
use crate::counts::CountLedger;
use crate::error::{check_bandwidth, FdaError};
use crate::estimate::{CurveEstimate, SurfaceEstimate};
use crate::grid::GridSpec;
use crate::kernel::{Kernel, KernelFamily};
use crate::linalg::DEFAULT_RIDGE;
use crate::smoother::{cov_substats, mean_substats, Design};

/// Curve (`d = 1`) or surface (`d = 2`) smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Curve,
    Surface,
}

impl Dimension {
    pub fn d(self) -> usize {
        match self {
            Dimension::Curve => 1,
            Dimension::Surface => 2,
        }
    }

    /// Exponent of the candidate sequence, `1 / (d + 4)`.
    pub fn candidate_exponent(self) -> f64 {
        1.0 / (self.d() as f64 + 4.0)
    }
}

/// How the bandwidth of each block is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Online plug-in from the pilot estimates.
    PlugIn,
    /// Fixed bandwidths; pilots are not run.
    Pinned { mu: f64, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    /// Slots `L` of the mean bank.
    pub slots_mean: usize,
    /// Slots `L` of the covariance bank.
    pub slots_cov: usize,
    pub kernel: KernelFamily,
    pub curve_grid: GridSpec,
    pub surface_grid: GridSpec,
    pub mode: DesignMode,
    pub pilots: PilotConstants,
    pub rule: BandwidthRule,
    pub ridge: f64,
}

impl StreamConfig {
    /// Defaults with `L` slots for both banks.
    pub fn with_slots(l: usize) -> Self {
        StreamConfig {
            slots_mean: l,
            slots_cov: l,
            kernel: KernelFamily::Epanechnikov,
            curve_grid: GridSpec::unit_curve(),
            surface_grid: GridSpec::unit_surface(),
            mode: DesignMode::Sparse,
            pilots: PilotConstants::for_slots(l),
            rule: BandwidthRule::PlugIn,
            ridge: DEFAULT_RIDGE,
        }
    }

    pub fn pinned(mut self, mu: f64, gamma: f64) -> Self {
        self.rule = BandwidthRule::Pinned { mu, gamma };
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.slots_mean == 0 || self.slots_cov == 0 {
            return Err(FdaError::InvalidConfig("L must be at least 1".into()));
        }
        if self.curve_grid.lo() != self.surface_grid.lo()
            || self.curve_grid.hi() != self.surface_grid.hi()
        {
            return Err(FdaError::InvalidConfig(
                "curve and surface grids must share a domain".into(),
            ));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(FdaError::InvalidConfig(
                "ridge scale must be nonnegative".into(),
            ));
        }
        if let BandwidthRule::Pinned { mu, gamma } = self.rule {
            check_bandwidth(mu)?;
            check_bandwidth(gamma)?;
        }
        self.pilots.validate()
    }
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self::with_slots(5)
    }
}

/// What one step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub mean: CurveEstimate,
    /// Latest covariance surface; `None` until some block has a pair.
    pub cov: Option<SurfaceEstimate>,
    pub h_mu: f64,
    pub h_gamma: Option<f64>,
    pub mean_plan: MatchPlan,
    /// `None` when the block had no within-subject pairs.
    pub cov_plan: Option<MatchPlan>,
}

/// Streaming mean and covariance estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineEstimator {
    pub(crate) config: StreamConfig,
    pub(crate) kernel: Kernel,
    pub(crate) ledger: CountLedger,
    pub(crate) mean_bank: CandidateBank,
    pub(crate) cov_bank: CandidateBank,
    pub(crate) pilots: PilotState,
    pub(crate) h_mu: Option<f64>,
    pub(crate) h_gamma: Option<f64>,
    pub(crate) mean: Option<CurveEstimate>,
    pub(crate) cov: Option<SurfaceEstimate>,
}

impl OnlineEstimator {
    pub fn new(config: StreamConfig) -> crate::Result<Self> {
        config.validate()?;
        let kernel = Kernel::new(config.kernel)?;
        let mean_bank = CandidateBank::new(
            Design::Linear1D,
            config.curve_grid.len(),
            config.slots_mean,
            Dimension::Curve.candidate_exponent(),
        )?;
        let cov_bank = CandidateBank::new(
            Design::Linear2D,
            config.surface_grid.len(),
            config.slots_cov,
            Dimension::Surface.candidate_exponent(),
        )?;
        let pilots = PilotState::new(
            config.pilots,
            config.mode,
            config.curve_grid,
            config.surface_grid,
        )?;
        Ok(OnlineEstimator {
            config,
            kernel,
            ledger: CountLedger::new(),
            mean_bank,
            cov_bank,
            pilots,
            h_mu: None,
            h_gamma: None,
            mean: None,
            cov: None,
        })
    }

    /// Records every slot's bandwidth history in both banks.
    pub fn track_chains(&mut self) {
        self.mean_bank.track_chain();
        self.cov_bank.track_chain();
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn ledger(&self) -> &CountLedger {
        &self.ledger
    }

    pub fn mean_bank(&self) -> &CandidateBank {
        &self.mean_bank
    }

    pub fn cov_bank(&self) -> &CandidateBank {
        &self.cov_bank
    }

    pub fn pilots(&self) -> &PilotState {
        &self.pilots
    }

    /// Blocks absorbed so far.
    pub fn blocks(&self) -> u64 {
        self.ledger.n_blocks
    }

    pub fn mean(&self) -> Option<&CurveEstimate> {
        self.mean.as_ref()
    }

    pub fn cov(&self) -> Option<&SurfaceEstimate> {
        self.cov.as_ref()
    }

    pub fn h_mu(&self) -> Option<f64> {
        self.h_mu
    }

    pub fn h_gamma(&self) -> Option<f64> {
        self.h_gamma
    }

    /// Absorbs one block. On error the estimator is left unchanged.
    pub fn step(&mut self, block: &Block) -> crate::Result<StepOutput> {
        block.check_domain(&self.config.curve_grid)?;
        let block = block.canonical();
        let mut next = self.clone();
        let out = next.advance(&block)?;
        *self = next;
        Ok(out)
    }

    fn advance(&mut self, block: &Block) -> crate::Result<StepOutput> {
        let kernel = self.kernel;
        let cg = self.config.curve_grid;
        let sg = self.config.surface_grid;
        let ridge = self.config.ridge;

        self.ledger.update(block);
        let ledger = self.ledger;
        let k = ledger.n_blocks;

        let h_mu = match self.config.rule {
            BandwidthRule::PlugIn => {
                self.pilots
                    .update_mean(block, &ledger, &kernel, self.h_mu)?;
                self.pilots.mean_bandwidth(&ledger, &kernel)
            }
            BandwidthRule::Pinned { mu, .. } => mu,
        };
        let mean_plan = self
            .mean_bank
            .absorb(h_mu, ledger.weight(1), ledger.last(1), |h| {
                mean_substats(block, h, &cg, &kernel)
            })?;
        let mean = CurveEstimate::from_stats(self.mean_bank.leading(), cg, h_mu, k, ridge)?;
        self.h_mu = Some(h_mu);

        let mut cov_plan = None;
        if ledger.last(2) > 0.0 {
            let residuals: Vec<Vec<f64>> = block.map_values(|t, y| y - mean.evaluate(t));
            let h_gamma = match self.config.rule {
                BandwidthRule::PlugIn => {
                    self.pilots
                        .update_cov(block, &residuals, &ledger, &kernel)?;
                    self.pilots.cov_bandwidth(&ledger, &kernel)
                }
                BandwidthRule::Pinned { gamma, .. } => gamma,
            };
            let plan = self
                .cov_bank
                .absorb(h_gamma, ledger.weight(2), ledger.last(2), |h| {
                    cov_substats(block, &residuals, h, &sg, &kernel)
                })?;
            self.cov = Some(SurfaceEstimate::from_stats(
                self.cov_bank.leading(),
                sg,
                h_gamma,
                k,
                ridge,
            )?);
            self.h_gamma = Some(h_gamma);
            cov_plan = Some(plan);
        }
        self.mean = Some(mean.clone());
        Ok(StepOutput {
            mean,
            cov: self.cov.clone(),
            h_mu,
            h_gamma: self.h_gamma,
            mean_plan,
            cov_plan,
        })
    }
}
