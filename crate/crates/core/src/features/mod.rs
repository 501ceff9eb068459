//! Per-frame quality features computed from pairs of wavelet pyramids.

pub mod activity;
pub mod dlm;
pub mod id;
pub mod info;
pub mod ssim;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::DEFAULT_WINDOW;

pub use id::{all_feature_ids, FeatureId, FeatureKind};

/// Tunable constants shared by the feature families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub k1: f64,
    pub k2: f64,
    /// Neural noise variance for VIF and the entropic differences.
    pub sigma_n_sq: f64,
    /// Side of the box window for VIF and RRED statistics.
    pub window: usize,
    pub window_stride: usize,
    /// Orientation change (degrees) above which DLM clips the gain to [0, 1].
    pub dlm_angle_deg: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            k1: (0.01f64 * 255.0).powi(2),
            k2: (0.03f64 * 255.0).powi(2),
            sigma_n_sq: 2.0,
            window: DEFAULT_WINDOW,
            window_stride: 1,
            dlm_angle_deg: 1.0,
        }
    }
}

/// Spatial pooling of a similarity map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Mean,
    /// Coefficient of variation: population std over mean.
    CoV,
}

pub fn mean(map: &Array2<f64>) -> f64 {
    map.sum() / map.len() as f64
}

/// Population standard deviation.
pub fn std_dev(map: &Array2<f64>) -> f64 {
    let m = mean(map);
    (map.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / map.len() as f64).sqrt()
}

pub fn pool(map: &Array2<f64>, method: Pool) -> Result<f64> {
    if map.is_empty() {
        return Err(Error::Numeric("cannot pool an empty map".into()));
    }
    match method {
        Pool::Mean => Ok(mean(map)),
        Pool::CoV => {
            if map.len() == 1 {
                return Ok(0.0);
            }
            let m = mean(map);
            let s = std_dev(map);
            if m == 0.0 {
                if s == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Numeric("coefficient of variation of a zero-mean map".into()))
                }
            } else {
                Ok(s / m)
            }
        }
    }
}
