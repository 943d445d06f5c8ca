use std::io;

use thiserror::Error;

/// Errors produced by the selective relevance library.
#[derive(Debug, Error)]
pub enum Error {
    /// A volume or grid is too small (or empty) for the requested operation.
    #[error("size error: {0}")]
    Size(String),

    /// A binary file did not match its declared layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Arguments are inconsistent with each other or with a precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A model could not be assembled from its architecture and weights.
    #[error("load error in layer `{layer}`: {message}")]
    Load { layer: String, message: String },

    /// Architecture or config text could not be parsed.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A support-based metric was requested over an empty relevance support.
    #[error("empty-relevance: {0}")]
    EmptyRelevance(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn input(message: impl Into<String>) -> Self {
        Error::Input(message.into())
    }

    pub(crate) fn load(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            layer: layer.into(),
            message: message.into(),
        }
    }
}
