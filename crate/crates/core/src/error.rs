use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("shape mismatch: expected {expected}, got {actual} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid embedding: {0}")]
    Embedding(String),

    #[error("training diverged at step {step}: non-finite loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("non-finite value during sampling at t = {t}")]
    NonFinite { t: usize },

    #[error("degenerate encoder pool: rank {rank} below requested dimension {dim}")]
    DegeneratePool { rank: usize, dim: usize },

    #[error("unknown style family `{0}`")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {format} file: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            what,
            expected,
            actual,
        }
    }
}
