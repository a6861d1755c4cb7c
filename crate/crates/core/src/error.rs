use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for width {len}")]
    InvalidIndex { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// `condition` is the squared ratio of the largest to the smallest
    /// Cholesky pivot, infinite when the factorisation broke down.
    #[error("weighted system not positive definite (condition estimate {condition:e}, ridge {ridge:e})")]
    NotPositiveDefinite { condition: f64, ridge: f64 },

    #[error("arity {arity} exceeds the limit of {max} for exhaustive enumeration")]
    ArityTooLarge { arity: usize, max: usize },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::NotPositiveDefinite { .. } | Error::Degenerate(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. } | Error::Json(_))
    }
}
