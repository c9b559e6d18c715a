//! Synthetic functional data, true mean and covariance, and Monte Carlo
//! comparison of the online and batch estimators.
//!
//! Curves are `X(t) = 2 sin(2πt) + Σ_{i=1}^{c} ξ_i φ_i(t)` with `φ_1 = 1`,
//! `φ_i(t) = √2 cos((i − 1)πt)` and `ξ_i ~ N(0, λ_i)`,
//! `λ_i = lambda_scale · i^{−2}`. Measurements add `N(0, σ²)` noise at
//! uniform times.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use fdastream_core::{
    batch_fit, BatchBandwidth, Block, GridSpec, OnlineEstimator, StreamConfig, Subject,
    SurfaceEstimate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// How many subjects per block and measurements per subject are drawn.
/// Counts are normal draws rounded to the nearest integer and floored at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimDesign {
    /// `n_k ~ N(20, 9)`, `m ~ N(6, 4)`.
    Sparse,
    /// `n_k = 3`, `m ~ N(20, 4)`.
    Dense,
    /// Means and variances of `n_k` and `m`.
    Custom {
        n_mean: f64,
        n_var: f64,
        m_mean: f64,
        m_var: f64,
    },
}

impl SimDesign {
    fn moments(self) -> (f64, f64, f64, f64) {
        match self {
            SimDesign::Sparse => (20.0, 9.0, 6.0, 4.0),
            SimDesign::Dense => (3.0, 0.0, 20.0, 4.0),
            SimDesign::Custom {
                n_mean,
                n_var,
                m_mean,
                m_var,
            } => (n_mean, n_var, m_mean, m_var),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimDesign::Sparse => "sparse",
            SimDesign::Dense => "dense",
            SimDesign::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: SimDesign,
    /// Noise standard deviation.
    pub sigma: f64,
    pub n_components: usize,
    pub lambda_scale: f64,
    pub k_max: usize,
    pub n_reps: usize,
    pub seed: u64,
    /// Batch refits happen every this many blocks (and at `k_max`).
    pub checkpoint_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            design: SimDesign::Sparse,
            sigma: 0.5,
            n_components: 10,
            lambda_scale: 0.4,
            k_max: 200,
            n_reps: 20,
            seed: 1,
            checkpoint_every: 40,
        }
    }
}

impl SimConfig {
    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda_scale / (i * i) as f64
    }

    /// Block indices (1-based) at which the batch estimator is refitted.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = match self.k_max.checked_div(self.checkpoint_every) {
            None => Vec::new(),
            Some(n) => (1..=n).map(|i| i * self.checkpoint_every).collect(),
        };
        if c.last() != Some(&self.k_max) && self.k_max > 0 {
            c.push(self.k_max);
        }
        c
    }
}

/// `μ(t) = 2 sin(2πt)`.
pub fn true_mean(t: f64) -> f64 {
    2.0 * (2.0 * PI * t).sin()
}

/// `φ_i(t)` for `i ≥ 1`.
pub fn basis(i: usize, t: f64) -> f64 {
    if i == 1 {
        1.0
    } else {
        SQRT_2 * ((i - 1) as f64 * PI * t).cos()
    }
}

/// `γ(s, t) = Σ λ_i φ_i(s) φ_i(t)`.
pub fn true_cov(config: &SimConfig, s: f64, t: f64) -> f64 {
    (1..=config.n_components)
        .map(|i| config.lambda(i) * basis(i, s) * basis(i, t))
        .sum()
}

/// Counter-style generator keyed by `(seed, rep, block, subject)`.
fn keyed_rng(seed: u64, rep: u64, block: u64, subject: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    key[16..24].copy_from_slice(&block.to_le_bytes());
    key[24..].copy_from_slice(&subject.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn rounded_count(rng: &mut ChaCha8Rng, mean: f64, var: f64) -> usize {
    let draw = if var > 0.0 {
        Normal::new(mean, var.sqrt())
            .expect("finite moments")
            .sample(rng)
    } else {
        mean
    };
    draw.round().max(1.0) as usize
}

/// Block `k` (1-based) of replicate `rep`.
pub fn generate_block(config: &SimConfig, rep: u64, k: u64) -> Block {
    let (n_mean, n_var, m_mean, m_var) = config.design.moments();
    let mut rng = keyed_rng(config.seed, rep, k, u64::MAX);
    let n = rounded_count(&mut rng, n_mean, n_var);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let subjects = (0..n)
        .map(|i| {
            let mut rng = keyed_rng(config.seed, rep, k, i as u64);
            let m = rounded_count(&mut rng, m_mean, m_var);
            let xi: Vec<f64> = (1..=config.n_components)
                .map(|c| config.lambda(c).sqrt() * std_normal.sample(&mut rng))
                .collect();
            let mut times = Vec::with_capacity(m);
            let mut values = Vec::with_capacity(m);
            for _ in 0..m {
                let t: f64 = rng.random();
                let phi: f64 = xi
                    .iter()
                    .enumerate()
                    .map(|(c, x)| x * basis(c + 1, t))
                    .sum();
                let eps = config.sigma * std_normal.sample(&mut rng);
                times.push(t);
                values.push(true_mean(t) + phi + eps);
            }
            Subject::new(times, values).expect("generated subject is valid")
        })
        .collect();
    Block::new(k, subjects).expect("generated block is nonempty")
}

// Simpson weights for ∫_a^b of a quadratic in the local coordinate.
fn simpson(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Cells of `grid` clipped to `[lo + δ, hi − δ]` as `(cell index, a, b)`
/// with `a, b` the clipped ends in the cell's `[0, 1]` coordinate.
fn clipped_cells(grid: &GridSpec, delta: f64) -> Vec<(usize, f64, f64)> {
    let lo = grid.lo() + delta;
    let hi = grid.hi() - delta;
    let h = grid.spacing();
    let mut out = Vec::new();
    for c in 0..grid.len() - 1 {
        let x0 = grid.point(c);
        let a = ((lo - x0) / h).clamp(0.0, 1.0);
        let b = ((hi - x0) / h).clamp(0.0, 1.0);
        if b > a {
            out.push((c, a * h, b * h));
        }
    }
    out
}

/// Integrated squared error of a grid curve against `truth` over the
/// trimmed domain: the exact integral of the squared piecewise-linear
/// interpolant of the nodal errors.
pub fn imse_curve(grid: &GridSpec, values: &[f64], truth: impl Fn(f64) -> f64, delta: f64) -> f64 {
    let h = grid.spacing();
    let err: Vec<f64> = (0..grid.len())
        .map(|i| values[i] - truth(grid.point(i)))
        .collect();
    clipped_cells(grid, delta)
        .into_iter()
        .map(|(c, a, b)| {
            let e = |x: f64| {
                let f = x / h;
                let v = err[c] * (1.0 - f) + err[c + 1] * f;
                v * v
            };
            simpson(a, b, e)
        })
        .sum()
}

/// Two-dimensional analogue of [`imse_curve`] with the bilinear
/// interpolant over the trimmed square.
pub fn imse_surface(
    grid: &GridSpec,
    values: &[f64],
    truth: impl Fn(f64, f64) -> f64,
    delta: f64,
) -> f64 {
    let n = grid.len();
    let h = grid.spacing();
    let mut err = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            err[i * n + j] = values[i * n + j] - truth(grid.point(i), grid.point(j));
        }
    }
    let cells = clipped_cells(grid, delta);
    let mut total = 0.0;
    for &(ci, a0, b0) in &cells {
        for &(cj, a1, b1) in &cells {
            let e = |x: f64, y: f64| {
                let (fx, fy) = (x / h, y / h);
                let v = err[ci * n + cj] * (1.0 - fx) * (1.0 - fy)
                    + err[(ci + 1) * n + cj] * fx * (1.0 - fy)
                    + err[ci * n + cj + 1] * (1.0 - fx) * fy
                    + err[(ci + 1) * n + cj + 1] * fx * fy;
                v * v
            };
            total += simpson(a0, b0, |x| simpson(a1, b1, |y| e(x, y)));
        }
    }
    total
}

/// One row of the comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub rep: usize,
    pub k: usize,
    pub eff_mean: f64,
    pub eff_cov: f64,
    pub h_mu_online: f64,
    pub h_mu_batch: f64,
    pub h_gamma_online: f64,
    pub h_gamma_batch: f64,
    pub t_online_ms: f64,
    pub t_batch_ms: f64,
    pub ise_mean_online: f64,
    pub ise_mean_batch: f64,
    pub ise_cov_online: f64,
    pub ise_cov_batch: f64,
}

pub const REPORT_HEADER: &str =
    "rep,K,eff_mean,eff_cov,h_mu_online,h_mu_batch,h_gamma_online,h_gamma_batch,t_online_ms,t_batch_ms";

impl ReportRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.rep,
            self.k,
            self.eff_mean,
            self.eff_cov,
            self.h_mu_online,
            self.h_mu_batch,
            self.h_gamma_online,
            self.h_gamma_batch,
            self.t_online_ms,
            self.t_batch_ms
        )
    }
}

/// Monte Carlo aggregate at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSummary {
    pub k: usize,
    /// Mean batch ISE over mean online ISE.
    pub eff_mean: f64,
    pub eff_cov: f64,
    pub h_mu_online: f64,
    pub h_mu_batch: f64,
}

/// Aggregates rows per checkpoint as ratios of mean ISEs.
pub fn summarize(rows: &[ReportRow]) -> Vec<CheckpointSummary> {
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .map(|k| {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| r.k == k).collect();
            let n = sel.len() as f64;
            let mean = |f: fn(&ReportRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
            CheckpointSummary {
                k,
                eff_mean: mean(|r| r.ise_mean_batch) / mean(|r| r.ise_mean_online),
                eff_cov: mean(|r| r.ise_cov_batch) / mean(|r| r.ise_cov_online),
                h_mu_online: mean(|r| r.h_mu_online),
                h_mu_batch: mean(|r| r.h_mu_batch),
            }
        })
        .collect()
}

/// Streams one replicate and compares against batch refits at the
/// checkpoints. `batch` chooses the batch bandwidths; `None` means plug-in.
pub fn run_rep(
    sim: &SimConfig,
    stream: &StreamConfig,
    rep: usize,
    batch: Option<(f64, f64)>,
) -> fdastream_core::Result<Vec<ReportRow>> {
    let mut est = OnlineEstimator::new(stream.clone())?;
    let checkpoints = sim.checkpoints();
    let trim = stream.pilots.trim;
    let mut blocks = Vec::with_capacity(sim.k_max);
    let mut rows = Vec::new();
    for k in 1..=sim.k_max {
        let block = generate_block(sim, rep as u64, k as u64);
        let start = Instant::now();
        let out = est.step(&block)?;
        let t_online = start.elapsed().as_secs_f64() * 1e3;
        blocks.push(block);
        if !checkpoints.contains(&k) {
            continue;
        }
        let (bw_mu, bw_gamma) = match batch {
            Some((mu, gamma)) => (BatchBandwidth::Fixed(mu), BatchBandwidth::Fixed(gamma)),
            None => (BatchBandwidth::Auto, BatchBandwidth::Auto),
        };
        let start = Instant::now();
        let fit = batch_fit(&blocks, bw_mu, bw_gamma, stream)?;
        let t_batch = start.elapsed().as_secs_f64() * 1e3;

        let cg = stream.curve_grid;
        let ise_mo = imse_curve(&cg, &out.mean.values, true_mean, trim * cg.width());
        let ise_mb = imse_curve(&cg, &fit.mean.values, true_mean, trim * cg.width());
        let cov_ise = |s: &Option<SurfaceEstimate>| {
            s.as_ref().map_or(f64::NAN, |s| {
                imse_surface(
                    &s.grid,
                    &s.values,
                    |a, b| true_cov(sim, a, b),
                    trim * s.grid.width(),
                )
            })
        };
        let ise_co = cov_ise(&out.cov);
        let ise_cb = cov_ise(&fit.cov);
        rows.push(ReportRow {
            rep,
            k,
            eff_mean: ise_mb / ise_mo,
            eff_cov: ise_cb / ise_co,
            h_mu_online: out.h_mu,
            h_mu_batch: fit.h_mu,
            h_gamma_online: out.h_gamma.unwrap_or(f64::NAN),
            h_gamma_batch: fit.h_gamma.unwrap_or(f64::NAN),
            t_online_ms: t_online,
            t_batch_ms: t_batch,
            ise_mean_online: ise_mo,
            ise_mean_batch: ise_mb,
            ise_cov_online: ise_co,
            ise_cov_batch: ise_cb,
        });
    }
    Ok(rows)
}

/// All replicates, in parallel when `parallel` is set. Rows are ordered by
/// replicate then checkpoint either way.
pub fn run_experiment(
    sim: &SimConfig,
    stream: &StreamConfig,
    batch: Option<(f64, f64)>,
    parallel: bool,
) -> fdastream_core::Result<Vec<ReportRow>> {
    let reps: Vec<usize> = (0..sim.n_reps).collect();
    let results: Vec<_> = if parallel {
        reps.par_iter()
            .map(|&r| run_rep(sim, stream, r, batch))
            .collect()
    } else {
        reps.iter()
            .map(|&r| run_rep(sim, stream, r, batch))
            .collect()
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
