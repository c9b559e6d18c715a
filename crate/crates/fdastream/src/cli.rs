//! Command-line surface: argument definitions and subcommand dispatch.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fdastream_core::{
    batch_fit, efficiency_lower_bound, fpca, BatchBandwidth, Block, OnlineEstimator, StreamConfig,
};

use crate::config::Settings;
use crate::csv::{curve_csv, fpca_csv, read_surface, surface_csv};
use crate::io::{serialize_block, BlockReader};
use crate::sim::{generate_block, run_experiment, summarize, SimConfig, SimDesign, REPORT_HEADER};
use crate::snapshot::{self, write_atomic};

#[derive(Debug, Parser)]
#[command(
    name = "fdastream",
    version,
    about = "Online mean and covariance estimation for functional data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a synthetic block stream as JSON lines.
    Simulate(SimulateArgs),
    /// Stream blocks into a fresh estimator and save a snapshot.
    Fit(FitArgs),
    /// Load a snapshot and continue streaming.
    Resume(ResumeArgs),
    /// Pooled batch estimate of a block stream.
    BatchFit(BatchFitArgs),
    /// Monte Carlo comparison of online and batch estimates.
    Compare(CompareArgs),
    /// Table of the efficiency lower bound.
    Bound(BoundArgs),
    /// Principal components of a covariance surface CSV.
    Fpca(FpcaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Sparse,
    Dense,
}

impl From<DesignArg> for SimDesign {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Sparse => SimDesign::Sparse,
            DesignArg::Dense => SimDesign::Dense,
        }
    }
}

/// Estimator settings shared by the fitting subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct StreamArgs {
    /// TOML file with estimator settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate slots per bank.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Candidate slots of the covariance bank.
    #[arg(long = "L-cov")]
    pub l_cov: Option<usize>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// sparse or dense.
    #[arg(long)]
    pub design_mode: Option<String>,
    /// Pin the mean bandwidth (requires --h-gamma).
    #[arg(long)]
    pub h_mu: Option<f64>,
    /// Pin the covariance bandwidth (requires --h-mu).
    #[arg(long)]
    pub h_gamma: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub curve_points: Option<usize>,
    #[arg(long)]
    pub surface_points: Option<usize>,
    #[arg(long)]
    pub trim: Option<f64>,
    #[arg(long)]
    pub freeze_cov_after: Option<u64>,
}

impl StreamArgs {
    pub fn stream_config(&self) -> anyhow::Result<StreamConfig> {
        let base = match &self.config {
            Some(p) => {
                Settings::from_file(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => Settings::default(),
        };
        let flags = Settings {
            l: self.l,
            l_cov: self.l_cov,
            kernel: self.kernel.clone(),
            design_mode: self.design_mode.clone(),
            h_mu: self.h_mu,
            h_gamma: self.h_gamma,
            lo: self.lo,
            hi: self.hi,
            curve_points: self.curve_points,
            surface_points: self.surface_points,
            trim: self.trim,
            freeze_cov_after: self.freeze_cov_after,
            ..Settings::default()
        };
        Ok(base.overlay(&flags).stream_config()?)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "sparse")]
    pub design: DesignArg,
    /// Number of blocks.
    #[arg(long = "K", default_value_t = 200)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replicate index; streams with different indices are independent.
    #[arg(long, default_value_t = 0)]
    pub rep: u64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where blocks come from and where estimates go.
#[derive(Debug, Clone, Args)]
pub struct StreamIo {
    /// JSON-lines input; stdin when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for curve and surface CSVs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write CSVs every this many blocks (0: only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub io: StreamIo,
    /// Snapshot written after the stream ends.
    #[arg(long)]
    pub snapshot: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    /// Snapshot to continue from.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Where to write the updated snapshot (default: overwrite --snapshot).
    #[arg(long)]
    pub save: Option<PathBuf>,
    #[command(flatten)]
    pub io: StreamIo,
}

#[derive(Debug, Args)]
pub struct BatchFitArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    /// JSON-lines input; stdin when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for mean.csv and cov.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[arg(long, value_enum, default_value = "sparse")]
    pub design: DesignArg,
    #[arg(long = "K", default_value_t = 200)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 40)]
    pub checkpoint_every: usize,
    /// Fixed batch bandwidths `mu,gamma`; plug-in when absent.
    #[arg(long, value_parser = parse_pair)]
    pub batch_h: Option<(f64, f64)>,
    /// Run replicates sequentially.
    #[arg(long)]
    pub serial: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long = "max-L", default_value_t = 20)]
    pub max_l: usize,
}

#[derive(Debug, Args)]
pub struct FpcaArgs {
    /// Long-format `s,t,value` surface CSV.
    #[arg(long)]
    pub surface: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `mu,gamma`")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn open_input(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn BufRead>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => Ok(Box::new(BufReader::new(io::stdin()))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_estimates(dir: &Path, est: &OnlineEstimator, suffix: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(m) = est.mean() {
        write_atomic(
            &dir.join(format!("mean{suffix}.csv")),
            curve_csv(m).as_bytes(),
        )?;
    }
    if let Some(c) = est.cov() {
        write_atomic(
            &dir.join(format!("cov{suffix}.csv")),
            surface_csv(c).as_bytes(),
        )?;
    }
    Ok(())
}

/// Feeds every block of the input to `est`, writing checkpoint CSVs.
fn stream_into(est: &mut OnlineEstimator, io: &StreamIo) -> anyhow::Result<()> {
    let reader = BlockReader::new(open_input(&io.input)?, est.config().curve_grid);
    for block in reader {
        let block = block?;
        est.step(&block).with_context(|| {
            format!(
                "block {} (stream position {})",
                block.block_id,
                est.blocks() + 1
            )
        })?;
        if let Some(dir) = &io.out_dir {
            if io.checkpoint_every > 0 && est.blocks().is_multiple_of(io.checkpoint_every) {
                write_estimates(dir, est, &format!("_K{}", est.blocks()))?;
            }
        }
    }
    if let Some(dir) = &io.out_dir {
        write_estimates(dir, est, "")?;
    }
    Ok(())
}

fn read_all(input: &Option<PathBuf>, config: &StreamConfig) -> anyhow::Result<Vec<Block>> {
    let reader = BlockReader::new(open_input(input)?, config.curve_grid);
    Ok(reader.collect::<crate::error::Result<Vec<_>>>()?)
}

fn sim_config(design: DesignArg, k: usize, seed: u64, sigma: f64) -> SimConfig {
    SimConfig {
        design: design.into(),
        sigma,
        k_max: k,
        seed,
        ..SimConfig::default()
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let sim = sim_config(a.design, a.k, a.seed, a.sigma);
            let mut text = String::new();
            for k in 1..=a.k as u64 {
                text.push_str(&serialize_block(&generate_block(&sim, a.rep, k)));
                text.push('\n');
            }
            emit(&a.out, &text)
        }
        Command::Fit(a) => {
            let mut est = OnlineEstimator::new(a.stream.stream_config()?)?;
            stream_into(&mut est, &a.io)?;
            snapshot::save(&a.snapshot, &est)
                .with_context(|| format!("saving {}", a.snapshot.display()))?;
            eprintln!(
                "fit: {} blocks, snapshot {}",
                est.blocks(),
                a.snapshot.display()
            );
            Ok(())
        }
        Command::Resume(a) => {
            let mut est = snapshot::load(&a.snapshot)
                .with_context(|| format!("loading {}", a.snapshot.display()))?;
            stream_into(&mut est, &a.io)?;
            let target = a.save.as_ref().unwrap_or(&a.snapshot);
            snapshot::save(target, &est).with_context(|| format!("saving {}", target.display()))?;
            eprintln!(
                "resume: {} blocks, snapshot {}",
                est.blocks(),
                target.display()
            );
            Ok(())
        }
        Command::BatchFit(a) => {
            let config = a.stream.stream_config()?;
            let blocks = read_all(&a.input, &config)?;
            if blocks.is_empty() {
                bail!("batch-fit needs at least one block");
            }
            let (mu, gamma) = match config.rule {
                fdastream_core::BandwidthRule::Pinned { mu, gamma } => {
                    (BatchBandwidth::Fixed(mu), BatchBandwidth::Fixed(gamma))
                }
                fdastream_core::BandwidthRule::PlugIn => {
                    (BatchBandwidth::Auto, BatchBandwidth::Auto)
                }
            };
            let fit = batch_fit(&blocks, mu, gamma, &config)?;
            std::fs::create_dir_all(&a.out_dir)?;
            write_atomic(&a.out_dir.join("mean.csv"), curve_csv(&fit.mean).as_bytes())?;
            if let Some(c) = &fit.cov {
                write_atomic(&a.out_dir.join("cov.csv"), surface_csv(c).as_bytes())?;
            }
            eprintln!(
                "batch-fit: {} blocks, h_mu {:.6}, h_gamma {}",
                blocks.len(),
                fit.h_mu,
                fit.h_gamma.map_or("-".into(), |h| format!("{h:.6}"))
            );
            Ok(())
        }
        Command::Compare(a) => {
            let stream = a.stream.stream_config()?;
            let sim = SimConfig {
                n_reps: a.reps,
                checkpoint_every: a.checkpoint_every,
                ..sim_config(a.design, a.k, a.seed, a.sigma)
            };
            let rows = run_experiment(&sim, &stream, a.batch_h, !a.serial)?;
            let mut text = String::from(REPORT_HEADER);
            text.push('\n');
            for r in &rows {
                text.push_str(&r.csv());
                text.push('\n');
            }
            emit(&a.out, &text)?;
            for s in summarize(&rows) {
                eprintln!(
                    "K={:>5}  eff_mean {:.4}  eff_cov {:.4}  h_mu online {:.5} batch {:.5}",
                    s.k, s.eff_mean, s.eff_cov, s.h_mu_online, s.h_mu_batch
                );
            }
            Ok(())
        }
        Command::Bound(a) => {
            let mut out = String::from("L,d1,d2\n");
            for l in 1..=a.max_l {
                out.push_str(&format!(
                    "{l},{:.5},{:.5}\n",
                    efficiency_lower_bound(l, 1)?,
                    efficiency_lower_bound(l, 2)?
                ));
            }
            emit(&None, &out)
        }
        Command::Fpca(a) => {
            let surface = read_surface(&a.surface)?;
            let result = fpca(&surface, a.components)?;
            emit(&a.out, &fpca_csv(&result))
        }
    }
}
