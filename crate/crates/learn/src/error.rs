use std::path::PathBuf;

use funque_core::FeatureId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] funque_core::Error),

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

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("feature {0} has zero variance in the training set")]
    ZeroVariance(FeatureId),

    #[error("feature {0} is missing")]
    MissingFeature(FeatureId),

    #[error("sample {index} does not share the training feature set")]
    InconsistentFeatures { index: usize },

    #[error("SVR solver did not converge after {iterations} iterations (KKT gap {gap:.3e}, tolerance {tolerance:.1e})")]
    Convergence { iterations: usize, gap: f64, tolerance: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("feature cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
