use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum FdaError {
    /// Bandwidths must be strictly positive and finite.
    InvalidBandwidth(f64),
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// No grid point had any data inside its kernel window.
    AllDegenerate,
    InvalidBlock(String),
    /// A measurement time fell outside the configured domain.
    Domain {
        time: f64,
        lo: f64,
        hi: f64,
    },
    InvalidConfig(String),
    KernelCheck(String),
    Snapshot(String),
}

impl fmt::Display for FdaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FdaError::InvalidBandwidth(h) => write!(f, "invalid bandwidth {h}"),
            FdaError::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(
                f,
                "shape mismatch in {what}: expected {expected}, found {found}"
            ),
            FdaError::AllDegenerate => f.write_str("no grid point has data in its kernel window"),
            FdaError::InvalidBlock(msg) => write!(f, "invalid block: {msg}"),
            FdaError::Domain { time, lo, hi } => {
                write!(f, "time {time} outside domain [{lo}, {hi}]")
            }
            FdaError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            FdaError::KernelCheck(msg) => write!(f, "kernel check failed: {msg}"),
            FdaError::Snapshot(msg) => write!(f, "snapshot: {msg}"),
        }
    }
}

impl core::error::Error for FdaError {}

pub(crate) fn check_bandwidth(h: f64) -> crate::Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(FdaError::InvalidBandwidth(h))
    }
}
