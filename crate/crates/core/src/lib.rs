//! Streaming local-linear estimation of mean and covariance functions for
//! functional data observed as sparse, noisy measurements per subject.
//!
//! Data arrive in blocks of subjects. Each block is folded into a small bank
//! of grid-resident moment statistics computed at a decreasing sequence of
//! candidate bandwidths, so the estimator never revisits old data and its
//! memory does not grow with the number of blocks.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the simulation harness live in the companion `fdastream` crate.
//!
//! ```
//! use fdastream_core::{Block, OnlineEstimator, StreamConfig, Subject};
//!
//! let mut est = OnlineEstimator::new(StreamConfig::with_slots(5))?;
//! let block = Block::new(1, vec![Subject::new(vec![0.1, 0.5, 0.9], vec![0.3, 0.1, -0.2])?])?;
//! let out = est.step(&block)?;
//! assert!(out.mean.evaluate(0.5).is_finite());
//! let back = OnlineEstimator::from_bytes(&est.to_bytes())?;
//! assert_eq!(back, est);
//! # Ok::<(), fdastream_core::FdaError>(())
//! ```

#![no_std]
// Index loops mirror the matrix formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bandwidth;
pub mod bank;
pub mod batch;
pub mod block;
pub mod codec;
pub mod counts;
pub mod error;
pub mod estimate;
pub mod fpca;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod smoother;
pub mod stream;

pub use bandwidth::{
    efficiency_lower_bound, online_bandwidth, pilot_bandwidths, pilot_candidates, plug_in,
    BandwidthLimits, BoundConstants, DesignMode, PilotBandwidths, PilotConstants, PilotKind,
    PilotState,
};
pub use bank::{
    candidates, chain_moments, generate_candidates, match_candidates, CandidateBank, ChainLink,
    ChainMoments, MatchPlan, PseudoBandwidthChain, Slot,
};
pub use batch::{
    batch_cov, batch_cov_from_residuals, batch_fit, batch_mean, batch_mean_bandwidth,
    BatchBandwidth, BatchFit,
};
pub use block::{Block, Subject};
pub use counts::CountLedger;
pub use error::FdaError;
pub use estimate::{CurveEstimate, SurfaceEstimate};
pub use fpca::{fpca, FpcaResult};
pub use grid::GridSpec;
pub use kernel::{Kernel, KernelFamily};
pub use linalg::{solve_local, LocalFit};
pub use smoother::{
    cov_substats, cubic_substats, linear_substats, mean_substats, pair_substats, solve_curve,
    solve_surface, Design, LocalStats,
};
pub use stream::{BandwidthRule, Dimension, OnlineEstimator, StepOutput, StreamConfig};

pub type Result<T> = core::result::Result<T, FdaError>;
