//! Per-database feature tables stored as CSV with a JSON sidecar.
//!
//! The CSV has columns `video, mos, <feature ids...>`; the sidecar
//! `<name>.meta.json` records the transform, the code version and a content
//! key for invalidation.

use std::path::{Path, PathBuf};

use funque_core::{FeatureId, FeatureParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::ModelTransform;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pooled features and MOS for every video of one database.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub name: String,
    pub ids: Vec<FeatureId>,
    pub videos: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub mos: Vec<f64>,
}

impl FeatureTable {
    /// Table with numbered video labels.
    pub fn new(name: impl Into<String>, ids: Vec<FeatureId>, rows: Vec<Vec<f64>>, mos: Vec<f64>) -> Result<Self> {
        let videos = (0..rows.len()).map(|i| format!("video{i}")).collect();
        Self::with_videos(name, ids, videos, rows, mos)
    }

    pub fn with_videos(
        name: impl Into<String>,
        ids: Vec<FeatureId>,
        videos: Vec<String>,
        rows: Vec<Vec<f64>>,
        mos: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != mos.len() || rows.len() != videos.len() {
            return Err(Error::LengthMismatch {
                what: "table rows and MOS",
                left: rows.len(),
                right: mos.len(),
            });
        }
        if let Some(i) = rows.iter().position(|r| r.len() != ids.len()) {
            return Err(Error::InconsistentFeatures { index: i });
        }
        Ok(FeatureTable {
            name: name.into(),
            ids,
            videos,
            rows,
            mos,
        })
    }

    pub fn column_index(&self, id: &FeatureId) -> Result<usize> {
        self.ids.iter().position(|i| i == id).ok_or(Error::MissingFeature(*id))
    }

    /// Rows restricted to `ids`, in that order.
    pub fn columns(&self, ids: &[FeatureId]) -> Result<Vec<Vec<f64>>> {
        let idx = ids.iter().map(|id| self.column_index(id)).collect::<Result<Vec<_>>>()?;
        Ok(self.rows.iter().map(|r| idx.iter().map(|&k| r[k]).collect()).collect())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["video".to_string(), "mos".to_string()];
        header.extend(self.ids.iter().map(|i| i.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for ((v, r), m) in self.videos.iter().zip(&self.rows).zip(&self.mos) {
            let mut rec = vec![v.clone(), fmt17(*m)];
            rec.extend(r.iter().map(|x| fmt17(*x)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a table; the database name is the file stem.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let bad = |message: String| Error::Cache {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || &header[0] != "video" || &header[1] != "mos" {
            return Err(bad("header must start with `video,mos` and name at least one feature".into()));
        }
        let ids = header
            .iter()
            .skip(2)
            .map(|h| h.parse::<FeatureId>())
            .collect::<funque_core::Result<Vec<_>>>()?;
        let (mut videos, mut rows, mut mos) = (Vec::new(), Vec::new(), Vec::new());
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("row {}: column {} is not a finite number", n + 1, k + 1)))
            };
            videos.push(rec[0].to_string());
            mos.push(num(1)?);
            rows.push((2..header.len()).map(num).collect::<Result<Vec<_>>>()?);
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("db").to_string();
        Self::with_videos(name, ids, videos, rows, mos)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub database: String,
    pub code_version: String,
    pub transform: ModelTransform,
    pub key: String,
    /// Videos that could not be processed, with the reason.
    #[serde(default)]
    pub failures: Vec<(String, String)>,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

impl CacheMeta {
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let path = meta_path(csv_path);
        let text = serde_json::to_string_pretty(self).expect("metadata serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(csv_path: &Path) -> Result<Self> {
        let path = meta_path(csv_path);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }
}

/// Content key over the manifest bytes, the size of every listed video, the
/// transform, the feature parameters and the requested ids.
pub fn cache_key(
    manifest_bytes: &[u8],
    video_sizes: &[u64],
    transform: &ModelTransform,
    params: &FeatureParams,
    ids: &[FeatureId],
) -> String {
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update(manifest_bytes);
    for s in video_sizes {
        h.update(s.to_le_bytes());
    }
    h.update(serde_json::to_vec(transform).expect("transform serializes"));
    h.update(format!("{params:?}").as_bytes());
    for id in ids {
        h.update(id.to_string().as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}
