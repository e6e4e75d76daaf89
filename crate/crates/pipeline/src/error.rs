use std::path::PathBuf;

use thiserror::Error;

use crate::adapter::StageName;

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage} adapter exited with code {code:?}: {stderr}")]
    Exit {
        stage: StageName,
        code: Option<i32>,
        stderr: String,
    },

    #[error("{stage} adapter timed out after {seconds}s")]
    Timeout { stage: StageName, seconds: f64 },

    #[error("{stage} adapter could not start {program:?}: {source}")]
    Spawn {
        stage: StageName,
        program: String,
        source: std::io::Error,
    },

    #[error("{stage} adapter output {path} is invalid: {reason}")]
    BadOutput {
        stage: StageName,
        path: PathBuf,
        reason: String,
    },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error(transparent)]
    Stage(#[from] StageError),

    #[error(transparent)]
    Core(#[from] maskflow_core::Error),

    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        PipelineError::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}
