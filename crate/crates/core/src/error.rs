use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {layer}: expected {expected}, got {got}")]
    Dimension {
        layer: String,
        expected: String,
        got: String,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown state id {0}")]
    UnknownState(usize),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error on {path}: {source}")]
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
    pub(crate) fn dim(layer: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            layer: layer.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
