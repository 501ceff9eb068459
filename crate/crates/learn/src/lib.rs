//! Learning side of the quality engine: fusion regressors and model files,
//! rank-correlation evaluation across databases, and bucket-constrained
//! greedy feature selection over cached feature tables.

pub mod cache;
pub mod error;
pub mod eval;
pub mod fusion;
mod num;
pub mod presets;
pub mod select;

pub use cache::FeatureTable;
pub use error::{Error, Result};
pub use fusion::{FusionModel, RegressorKind, TrainConfig};
pub use presets::Preset;
