//! Full-data reference estimators.
//!
//! Sub-statistics are summed block by block in the given order at a single
//! bandwidth, so an online estimator with one slot and a pinned bandwidth
//! reproduces these results exactly.

use alloc::vec::Vec;

use crate::bandwidth::{PilotConstants, PilotState};
use crate::block::Block;
use crate::counts::CountLedger;
use crate::error::FdaError;
use crate::estimate::{CurveEstimate, SurfaceEstimate};
use crate::kernel::Kernel;
use crate::smoother::{cov_substats, mean_substats, Design, LocalStats};
use crate::stream::StreamConfig;

/// Bandwidth for a batch fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchBandwidth {
    Fixed(f64),
    /// Plug-in from pilots computed on the pooled data.
    Auto,
}

/// Batch mean and covariance with the bandwidths used.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchFit {
    pub mean: CurveEstimate,
    pub cov: Option<SurfaceEstimate>,
    pub h_mu: f64,
    pub h_gamma: Option<f64>,
}

fn check_nonempty(blocks: &[Block]) -> crate::Result<()> {
    if blocks.is_empty() {
        return Err(FdaError::InvalidBlock("dataset has no blocks".into()));
    }
    Ok(())
}

fn canonical(blocks: &[Block]) -> Vec<Block> {
    blocks.iter().map(|b| b.canonical()).collect()
}

struct PooledPilots {
    pilots: PilotState,
    ledger: CountLedger,
    pooled: Block,
}

fn pooled_pilots(
    blocks: &[Block],
    config: &StreamConfig,
    kernel: &Kernel,
) -> crate::Result<PooledPilots> {
    let pooled = Block::pooled(blocks)?;
    let consts = PilotConstants {
        j_mean: 1,
        j_cov: 1,
        freeze_mean_after: 0,
        freeze_cov_after: 0,
        ..config.pilots
    };
    let mut pilots = PilotState::new(consts, config.mode, config.curve_grid, config.surface_grid)?;
    let mut ledger = CountLedger::new();
    ledger.update(&pooled);
    pilots.update_mean(&pooled, &ledger, kernel, None)?;
    if config.mode == crate::bandwidth::DesignMode::Dense {
        let h0 = pilots.mean_bandwidth(&ledger, kernel);
        pilots.refresh_nu_mu(&ledger, kernel, Some(h0));
    }
    Ok(PooledPilots {
        pilots,
        ledger,
        pooled,
    })
}

/// Plug-in mean bandwidth on the pooled data.
pub fn batch_mean_bandwidth(blocks: &[Block], config: &StreamConfig) -> crate::Result<f64> {
    check_nonempty(blocks)?;
    let kernel = Kernel::new(config.kernel)?;
    let p = pooled_pilots(&canonical(blocks), config, &kernel)?;
    Ok(p.pilots.mean_bandwidth(&p.ledger, &kernel))
}

fn mean_at(
    blocks: &[Block],
    h: f64,
    config: &StreamConfig,
    kernel: &Kernel,
) -> crate::Result<CurveEstimate> {
    let grid = config.curve_grid;
    let mut total = LocalStats::zeros(Design::Linear1D, &grid);
    for b in blocks {
        b.check_domain(&grid)?;
        total.add_assign(&mean_substats(b, h, &grid, kernel)?)?;
    }
    CurveEstimate::from_stats(&total, grid, h, blocks.len() as u64, config.ridge)
}

/// Pooled local-linear mean.
pub fn batch_mean(
    blocks: &[Block],
    bandwidth: BatchBandwidth,
    config: &StreamConfig,
) -> crate::Result<CurveEstimate> {
    check_nonempty(blocks)?;
    let blocks = canonical(blocks);
    let kernel = Kernel::new(config.kernel)?;
    let h = match bandwidth {
        BatchBandwidth::Fixed(h) => h,
        BatchBandwidth::Auto => {
            let p = pooled_pilots(&blocks, config, &kernel)?;
            p.pilots.mean_bandwidth(&p.ledger, &kernel)
        }
    };
    mean_at(&blocks, h, config, &kernel)
}

/// Pooled covariance smoother at bandwidth `h` with caller-supplied
/// residuals (one vector per subject, aligned with the canonical subject and
/// measurement order of each block).
pub fn batch_cov_from_residuals(
    blocks: &[Block],
    residuals: &[Vec<Vec<f64>>],
    h: f64,
    config: &StreamConfig,
) -> crate::Result<SurfaceEstimate> {
    check_nonempty(blocks)?;
    if residuals.len() != blocks.len() {
        return Err(FdaError::ShapeMismatch {
            what: "residual blocks",
            expected: blocks.len(),
            found: residuals.len(),
        });
    }
    let kernel = Kernel::new(config.kernel)?;
    let grid = config.surface_grid;
    let mut total = LocalStats::zeros(Design::Linear2D, &grid);
    for (b, r) in blocks.iter().zip(residuals) {
        total.add_assign(&cov_substats(b, r, h, &grid, &kernel)?)?;
    }
    SurfaceEstimate::from_stats(&total, grid, h, blocks.len() as u64, config.ridge)
}

/// Pooled covariance smoother using residuals from the batch mean.
pub fn batch_cov(
    blocks: &[Block],
    mean: &CurveEstimate,
    bandwidth: BatchBandwidth,
    config: &StreamConfig,
) -> crate::Result<SurfaceEstimate> {
    check_nonempty(blocks)?;
    let blocks = canonical(blocks);
    let residuals: Vec<Vec<Vec<f64>>> = blocks
        .iter()
        .map(|b| b.map_values(|t, y| y - mean.evaluate(t)))
        .collect();
    let h = match bandwidth {
        BatchBandwidth::Fixed(h) => h,
        BatchBandwidth::Auto => {
            let kernel = Kernel::new(config.kernel)?;
            let mut p = pooled_pilots(&blocks, config, &kernel)?;
            let pooled_resid = p.pooled.map_values(|t, y| y - mean.evaluate(t));
            p.pilots
                .update_cov(&p.pooled, &pooled_resid, &p.ledger, &kernel)?;
            p.pilots.cov_bandwidth(&p.ledger, &kernel)
        }
    };
    batch_cov_from_residuals(&blocks, &residuals, h, config)
}

/// Mean and covariance on the pooled data. With `Auto`, pilots run once on
/// the pooled block; the covariance pilots see residuals from the batch
/// mean.
pub fn batch_fit(
    blocks: &[Block],
    mu: BatchBandwidth,
    gamma: BatchBandwidth,
    config: &StreamConfig,
) -> crate::Result<BatchFit> {
    check_nonempty(blocks)?;
    let blocks = canonical(blocks);
    let kernel = Kernel::new(config.kernel)?;
    let needs_pilots = mu == BatchBandwidth::Auto || gamma == BatchBandwidth::Auto;
    let mut pilots = if needs_pilots {
        Some(pooled_pilots(&blocks, config, &kernel)?)
    } else {
        None
    };
    let h_mu = match (mu, &pilots) {
        (BatchBandwidth::Fixed(h), _) => h,
        (BatchBandwidth::Auto, Some(p)) => p.pilots.mean_bandwidth(&p.ledger, &kernel),
        (BatchBandwidth::Auto, None) => unreachable!(),
    };
    let mean = mean_at(&blocks, h_mu, config, &kernel)?;
    let residuals: Vec<Vec<Vec<f64>>> = blocks
        .iter()
        .map(|b| b.map_values(|t, y| y - mean.evaluate(t)))
        .collect();
    let has_pairs = blocks
        .iter()
        .any(|b| b.subjects.iter().any(|s| s.len() >= 2));
    if !has_pairs {
        return Ok(BatchFit {
            mean,
            cov: None,
            h_mu,
            h_gamma: None,
        });
    }
    let h_gamma = match (gamma, &mut pilots) {
        (BatchBandwidth::Fixed(h), _) => h,
        (BatchBandwidth::Auto, Some(p)) => {
            let pooled_resid = p.pooled.map_values(|t, y| y - mean.evaluate(t));
            p.pilots
                .update_cov(&p.pooled, &pooled_resid, &p.ledger, &kernel)?;
            p.pilots.cov_bandwidth(&p.ledger, &kernel)
        }
        (BatchBandwidth::Auto, None) => unreachable!(),
    };
    let cov = batch_cov_from_residuals(&blocks, &residuals, h_gamma, config)?;
    Ok(BatchFit {
        mean,
        cov: Some(cov),
        h_mu,
        h_gamma: Some(h_gamma),
    })
}
