use fdastream_core::FdaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {cause}")]
    Domain { line: usize, cause: FdaError },
    #[error(transparent)]
    Core(#[from] FdaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Csv { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, IoError>;
