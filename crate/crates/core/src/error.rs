use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("truncated video: frame data at byte offset {offset} needs {needed} bytes, file holds {available}")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },

    #[error("10-bit sample {value} at byte offset {offset} exceeds 1023")]
    SampleRange { offset: u64, value: u16 },

    #[error("invalid video spec: {0}")]
    InvalidSpec(String),

    #[error("frame {index} out of range for a {count}-frame video")]
    FrameIndex { index: usize, count: usize },

    #[error("{path}: row {row}: {message}")]
    Manifest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("csf configuration: {0}")]
    CsfConfig(String),

    #[error("plane of {height}x{width} is too small for a {levels}-level transform")]
    InputTooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("invalid transform config: {0}")]
    InvalidConfig(String),

    #[error("invalid feature id `{0}`")]
    FeatureId(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("temporal pooling: {0}")]
    Pooling(String),
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
