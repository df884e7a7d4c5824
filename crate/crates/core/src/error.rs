use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller broke an API contract (e.g. a missing class label on a conditional model).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at step {step}: {reason}")]
    Training { step: usize, reason: String },

    #[error("integration produced a non-finite state at step {step}")]
    Integration { step: usize },

    #[error("source weights must sum to 1 (got {0})")]
    WeightSum(f64),

    #[error("unknown source tag `{0}`")]
    UnknownTag(String),

    #[error("missing prerequisite file {}", .0.display())]
    MissingPrerequisite(PathBuf),

    /// Invalid experiment configuration; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
