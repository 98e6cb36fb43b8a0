use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NvmdpError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = NvmdpError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> NvmdpError {
    NvmdpError::Validation(msg.into())
}
