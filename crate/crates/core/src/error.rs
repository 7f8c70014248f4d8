use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("invalid proposals for video `{video_id}`: {reason}")]
    InvalidProposals { video_id: String, reason: String },

    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{path}: invalid record for video `{video_id}`: {reason}")]
    InvalidRecord {
        path: PathBuf,
        video_id: String,
        reason: String,
    },

    #[error("model format mismatch: {0}")]
    ModelVersion(String),

    #[error("no usable pairs: {0}")]
    Empty(String),

    #[error("fitness evaluation failed: {0}")]
    Fitness(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
