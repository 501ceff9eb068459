//! Full-reference video quality features computed from one shared,
//! contrast-sensitivity weighted Haar wavelet transform.

pub mod baseline;
pub mod csf;
pub mod error;
pub mod extract;
pub mod features;
pub mod io;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use extract::{Extractor, FeatureVector, FrameSource, VideoFeatures};
pub use features::{FeatureId, FeatureKind, FeatureParams};
