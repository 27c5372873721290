use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the selection library.
#[derive(Debug, Error)]
pub enum AbcError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scheduler contract violated: {0}")]
    Scheduler(String),

    #[error("probe of configuration {config_id} failed in round {round}: {source}")]
    Probe {
        round: usize,
        config_id: usize,
        #[source]
        source: ProbeError,
    },

    #[error("{0}")]
    Backend(#[from] ProbeError),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed trace at line {line}: {reason}")]
    Trace { line: usize, reason: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Failures coming from a probe backend (data loading, training, sizing).
#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("unknown configuration id {0}")]
    UnknownConfig(usize),

    #[error("requested {requested} {part} samples but only {available} exist")]
    SampleTooLarge {
        part: &'static str,
        requested: u64,
        available: u64,
    },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid learner: {0}")]
    InvalidLearner(String),

    #[error("dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("dataset: {0}")]
    Data(String),
}

pub type Result<T, E = AbcError> = std::result::Result<T, E>;

impl AbcError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        AbcError::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AbcError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by data or backend failures rather than bad input.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            AbcError::Probe { .. } | AbcError::Backend(_) | AbcError::Io { .. }
        )
    }
}
