//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SermlError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unknown user id: {0}")]
    UnknownUser(String),

    #[error("unknown item id: {0}")]
    UnknownItem(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("non-finite loss: {0}")]
    NonFinite(String),

    #[error("gradient check failed for tensors: {0:?}")]
    GradCheck(Vec<String>),
}

pub type Result<T> = std::result::Result<T, SermlError>;

impl SermlError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SermlError::Io {
            path: path.into(),
            source,
        }
    }
}
