use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BanditError>;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no data rows")]
    NoDataRows,

    #[error("unknown label column `{0}`")]
    UnknownLabelColumn(String),

    #[error("unknown hyperparameter `{0}`")]
    UnknownHyperparameter(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BanditError {
    /// Short stable identifier used in CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            BanditError::DimensionMismatch { .. } => "dimension-mismatch",
            BanditError::NonFinite(_) => "non-finite",
            BanditError::InvalidConfig(_) => "invalid-config",
            BanditError::IndexOutOfRange { .. } => "index-out-of-range",
            BanditError::Parse { .. } => "parse",
            BanditError::NoDataRows => "no-data-rows",
            BanditError::UnknownLabelColumn(_) => "unknown-label-column",
            BanditError::UnknownHyperparameter(_) => "unknown-hyperparameter",
            BanditError::UnknownAlgorithm(_) => "unknown-algorithm",
            BanditError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BanditError::Io {
            path: path.into(),
            source,
        }
    }
}
