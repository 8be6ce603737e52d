use thiserror::Error;

use crate::tensor::Rect;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rect {rect:?} is not contained in a {height}x{width} image")]
    RectOutOfBounds {
        rect: Rect,
        height: usize,
        width: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("config error on key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("network has no early head")]
    MissingEarlyHead,

    #[error("no saliency map for image {index}")]
    MissingSaliency { index: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
