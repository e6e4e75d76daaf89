use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DmpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DmpError {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("malformed parameter file {path}: {reason}")]
    ParamFormat { path: PathBuf, reason: String },

    #[error("loss curve {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl DmpError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        DmpError::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        DmpError::ShapeMismatch {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
