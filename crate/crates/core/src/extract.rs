//! Video-level feature extraction: decode frame pairs, transform once, and
//! evaluate only the requested features, then pool over time.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csf::{CsfConfig, Subband};
use crate::error::{Error, Result};
use crate::features::info::{srred_terms, trred_terms, vif_terms};
use crate::features::ssim::{essim, ms_essim, ms_ssim, scale_stats, ssim, ScaleStats};
use crate::features::{activity, dlm, FeatureId, FeatureKind, FeatureParams};
use crate::io::{Channel, FramePlanes, YuvReader};
use crate::transform::{TransformConfig, UnifiedTransform, WaveletPyramid};

/// Random access to the frames of one video.
pub trait FrameSource: Sync {
    fn frame_count(&self) -> usize;
    /// Luma `(width, height)`.
    fn dims(&self) -> (usize, usize);
    fn frame(&self, index: usize) -> Result<FramePlanes>;
}

impl FrameSource for YuvReader {
    fn frame_count(&self) -> usize {
        self.spec().frame_count
    }

    fn dims(&self) -> (usize, usize) {
        (self.spec().width, self.spec().height)
    }

    fn frame(&self, index: usize) -> Result<FramePlanes> {
        self.read_frame(index)
    }
}

impl FrameSource for [FramePlanes] {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn dims(&self) -> (usize, usize) {
        self.first().map(|f| (f.width(), f.height())).unwrap_or((0, 0))
    }

    fn frame(&self, index: usize) -> Result<FramePlanes> {
        self.get(index).cloned().ok_or(Error::FrameIndex {
            index,
            count: self.len(),
        })
    }
}

impl FrameSource for Vec<FramePlanes> {
    fn frame_count(&self) -> usize {
        self.as_slice().frame_count()
    }

    fn dims(&self) -> (usize, usize) {
        self.as_slice().dims()
    }

    fn frame(&self, index: usize) -> Result<FramePlanes> {
        self.as_slice().frame(index)
    }
}

/// Temporally pooled features of one video, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(BTreeMap<FeatureId, f64>);

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects duplicate ids and non-finite values.
    pub fn insert(&mut self, id: FeatureId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{id} is not finite ({value})")));
        }
        if self.0.insert(id, value).is_some() {
            return Err(Error::FeatureId(format!("{id} given twice")));
        }
        Ok(())
    }

    pub fn get(&self, id: &FeatureId) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FeatureId> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &f64)> {
        self.0.iter()
    }
}

impl FromIterator<(FeatureId, f64)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (FeatureId, f64)>>(iter: I) -> Self {
        FeatureVector(iter.into_iter().collect())
    }
}

/// Arithmetic mean over frames; lagged features skip the first frame.
pub fn pool_temporal(values: &[f64], lagged: bool) -> Result<f64> {
    let used = if lagged { values.get(1..).unwrap_or(&[]) } else { values };
    if used.is_empty() {
        return Err(Error::Pooling(if lagged {
            "a lagged feature needs at least two frames".into()
        } else {
            "no frames to pool".into()
        }));
    }
    Ok(used.iter().sum::<f64>() / used.len() as f64)
}

/// Per-frame values; `None` marks a lagged feature on the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PerFrame {
    pub ids: Vec<FeatureId>,
    pub rows: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub pooled: FeatureVector,
    pub per_frame: PerFrame,
}

/// Reference and distorted pyramids of one frame, per channel.
#[derive(Debug, Clone)]
pub struct FramePyramids {
    bands: [Option<(WaveletPyramid, WaveletPyramid)>; 3],
}

impl FramePyramids {
    pub fn get(&self, channel: Channel) -> Option<(&WaveletPyramid, &WaveletPyramid)> {
        self.bands[channel as usize].as_ref().map(|(x, y)| (x, y))
    }
}

#[derive(Debug, Clone)]
pub struct Extractor {
    transform: UnifiedTransform,
    params: FeatureParams,
    ids: Vec<FeatureId>,
    channels: Vec<Channel>,
    parallel: bool,
}

impl Extractor {
    pub fn new(cfg: TransformConfig, csf_config: &CsfConfig, params: FeatureParams, ids: &[FeatureId]) -> Result<Self> {
        cfg.validate()?;
        let ids: Vec<FeatureId> = ids.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if ids.is_empty() {
            return Err(Error::InvalidConfig("no features requested".into()));
        }
        if let Some(id) = ids.iter().find(|id| id.level > cfg.levels) {
            return Err(Error::InvalidConfig(format!(
                "{id} needs level {} but the transform has {} levels",
                id.level, cfg.levels
            )));
        }
        let channels: Vec<Channel> = ids.iter().map(|id| id.channel).collect::<BTreeSet<_>>().into_iter().collect();
        let transform = UnifiedTransform::new(cfg, csf_config, &channels)?;
        Ok(Extractor {
            transform,
            params,
            ids,
            channels,
            parallel: false,
        })
    }

    /// Evaluate frames concurrently on the current rayon pool.
    pub fn with_frame_parallelism(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    pub fn transform(&self) -> &UnifiedTransform {
        &self.transform
    }

    fn needs_lag(&self) -> bool {
        self.ids.iter().any(FeatureId::is_lagged)
    }

    pub fn pyramids(&self, reference: &FramePlanes, distorted: &FramePlanes) -> Result<FramePyramids> {
        let mut bands: [Option<(WaveletPyramid, WaveletPyramid)>; 3] = [None, None, None];
        for &ch in &self.channels {
            let x = self.transform.apply(reference.plane(ch), ch)?;
            let y = self.transform.apply(distorted.plane(ch), ch)?;
            bands[ch as usize] = Some((x, y));
        }
        Ok(FramePyramids { bands })
    }

    /// Values of every requested feature for one frame, in [`Self::ids`]
    /// order. Lagged features are `None` without a previous frame.
    pub fn frame_features(&self, cur: &FramePyramids, prev: Option<&FramePyramids>) -> Result<Vec<Option<f64>>> {
        let mut ctxs: HashMap<Channel, ChannelCtx<'_>> = HashMap::new();
        let mut out = Vec::with_capacity(self.ids.len());
        for id in &self.ids {
            let (x, y) = cur.get(id.channel).expect("channel transformed");
            let ctx = ctxs.entry(id.channel).or_insert_with(|| ChannelCtx {
                x,
                y,
                prev: prev.and_then(|p| p.get(id.channel)),
                params: &self.params,
                stats: None,
                vif: HashMap::new(),
                srred: HashMap::new(),
                trred: HashMap::new(),
            });
            out.push(ctx.value(id)?);
        }
        Ok(out)
    }

    fn frame_pair(&self, reference: &dyn FrameSource, distorted: &dyn FrameSource, t: usize) -> Result<FramePyramids> {
        self.pyramids(&reference.frame(t)?, &distorted.frame(t)?)
    }

    pub fn extract(&self, reference: &dyn FrameSource, distorted: &dyn FrameSource) -> Result<VideoFeatures> {
        let n = reference.frame_count();
        if n != distorted.frame_count() || reference.dims() != distorted.dims() {
            return Err(Error::InvalidSpec(format!(
                "reference ({} frames, {:?}) and distorted ({} frames, {:?}) differ",
                n,
                reference.dims(),
                distorted.frame_count(),
                distorted.dims()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidSpec("video has no frames".into()));
        }

        let rows: Vec<Vec<Option<f64>>> = if self.parallel {
            let lag = self.needs_lag();
            (0..n)
                .into_par_iter()
                .map(|t| {
                    let cur = self.frame_pair(reference, distorted, t)?;
                    let prev = if lag && t > 0 {
                        Some(self.frame_pair(reference, distorted, t - 1)?)
                    } else {
                        None
                    };
                    self.frame_features(&cur, prev.as_ref())
                })
                .collect::<Result<_>>()?
        } else {
            let mut rows = Vec::with_capacity(n);
            let mut prev: Option<FramePyramids> = None;
            for t in 0..n {
                let cur = self.frame_pair(reference, distorted, t)?;
                rows.push(self.frame_features(&cur, prev.as_ref())?);
                prev = Some(cur);
            }
            rows
        };

        let mut pooled = FeatureVector::new();
        for (k, id) in self.ids.iter().enumerate() {
            let lagged = id.is_lagged();
            let series: Vec<f64> = rows.iter().map(|r| r[k].unwrap_or(f64::NAN)).collect();
            let v = pool_temporal(&series, lagged).map_err(|e| Error::Pooling(format!("{id}: {e}")))?;
            pooled.insert(*id, v)?;
        }
        Ok(VideoFeatures {
            pooled,
            per_frame: PerFrame {
                ids: self.ids.clone(),
                rows,
            },
        })
    }
}

/// Per-frame, per-channel memo of intermediate sums shared across features.
struct ChannelCtx<'a> {
    x: &'a WaveletPyramid,
    y: &'a WaveletPyramid,
    prev: Option<(&'a WaveletPyramid, &'a WaveletPyramid)>,
    params: &'a FeatureParams,
    stats: Option<ScaleStats>,
    vif: HashMap<(usize, Subband), (f64, f64)>,
    srred: HashMap<(usize, Subband), (f64, usize)>,
    trred: HashMap<(usize, Subband), (f64, usize)>,
}

fn a_band(level: usize) -> Vec<(usize, Subband)> {
    vec![(level, Subband::A)]
}

fn hv_bands(level: usize) -> Vec<(usize, Subband)> {
    (1..=level).flat_map(|l| [(l, Subband::H), (l, Subband::V)]).collect()
}

impl ChannelCtx<'_> {
    fn stats(&mut self) -> &ScaleStats {
        if self.stats.is_none() {
            self.stats = Some(scale_stats(self.x, self.y, self.x.depth()));
        }
        self.stats.as_ref().expect("just set")
    }

    fn vif(&mut self, bands: &[(usize, Subband)]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(l, sb) in bands {
            let (x, y, p) = (self.x, self.y, self.params);
            let (n, d) = *self
                .vif
                .entry((l, sb))
                .or_insert_with(|| vif_terms(x.band(l, sb), y.band(l, sb), p));
            num += n;
            den += d;
        }
        if den == 0.0 {
            1.0
        } else {
            num / den
        }
    }

    fn srred(&mut self, bands: &[(usize, Subband)]) -> f64 {
        let (mut s, mut n) = (0.0, 0);
        for &(l, sb) in bands {
            let (x, y, p) = (self.x, self.y, self.params);
            let (a, b) = *self
                .srred
                .entry((l, sb))
                .or_insert_with(|| srred_terms(x.band(l, sb), y.band(l, sb), p));
            s += a;
            n += b;
        }
        s / n as f64
    }

    fn trred(&mut self, bands: &[(usize, Subband)]) -> Option<f64> {
        let (px, py) = self.prev?;
        let (mut s, mut n) = (0.0, 0);
        for &(l, sb) in bands {
            let (x, y, p) = (self.x, self.y, self.params);
            let (a, b) = *self.trred.entry((l, sb)).or_insert_with(|| {
                trred_terms(px.band(l, sb), x.band(l, sb), py.band(l, sb), y.band(l, sb), p)
            });
            s += a;
            n += b;
        }
        Some(s / n as f64)
    }

    fn value(&mut self, id: &FeatureId) -> Result<Option<f64>> {
        let l = id.level;
        let p = self.params;
        let (x, y) = (self.x, self.y);
        Ok(match id.kind {
            FeatureKind::Ssim => Some(ssim(self.stats(), l, p)?),
            FeatureKind::Essim => Some(essim(self.stats(), l, p)?),
            FeatureKind::MsSsim => Some(ms_ssim(self.stats(), l, p)?.value),
            FeatureKind::MsEssim => Some(ms_essim(self.stats(), l, p)?.value),
            FeatureKind::VifA => Some(self.vif(&a_band(l))),
            FeatureKind::VifHv => Some(self.vif(&hv_bands(l))),
            FeatureKind::SrredA => Some(self.srred(&a_band(l))),
            FeatureKind::SrredHv => Some(self.srred(&hv_bands(l))),
            FeatureKind::TrredA => self.trred(&a_band(l)),
            FeatureKind::TrredHv => self.trred(&hv_bands(l)),
            FeatureKind::StrredA => {
                let bands = a_band(l);
                self.trred(&bands).map(|t| t * self.srred(&bands))
            }
            FeatureKind::StrredHv => {
                let bands = hv_bands(l);
                self.trred(&bands).map(|t| t * self.srred(&bands))
            }
            FeatureKind::DlmS => Some(dlm::dlm_scale(x, y, l, p)),
            FeatureKind::DeltaTlSai => Some(activity::delta_tl_sai(x, y, l)),
            FeatureKind::DeltaTlBlur => Some(activity::delta_tl_blur(x, y, l)),
            FeatureKind::MadRef => self
                .prev
                .map(|(px, _)| activity::mad(x.band(l, Subband::A), px.band(l, Subband::A))),
            FeatureKind::MadDis => self
                .prev
                .map(|(_, py)| activity::mad(y.band(l, Subband::A), py.band(l, Subband::A))),
            FeatureKind::Mad => Some(activity::mad(x.band(l, Subband::A), y.band(l, Subband::A))),
            FeatureKind::Blur => Some(activity::blur(x, y, l)),
            FeatureKind::Edge => Some(activity::edge(x, y, l)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::id::all_feature_ids;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(n: usize, size: usize, seed: u64) -> Vec<FramePlanes> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut f = FramePlanes::constant(size, size, 0.0);
                for ch in Channel::ALL {
                    let (h, w) = f.plane(ch).dim();
                    *f.plane_mut(ch) = Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..255.0));
                }
                f
            })
            .collect()
    }

    #[test]
    fn pooling_rules() {
        assert_eq!(pool_temporal(&[1.0, 1.0, 1.0], false).unwrap(), 1.0);
        assert_eq!(pool_temporal(&[0.0, 2.0], false).unwrap(), 1.0);
        assert_eq!(pool_temporal(&[f64::NAN, 2.0, 4.0], true).unwrap(), 3.0);
        assert!(pool_temporal(&[1.0], true).is_err());
        assert!(pool_temporal(&[], false).is_err());
    }

    #[test]
    fn feature_vector_rejects_duplicates_and_nan() {
        let id: FeatureId = "Y-MAD@1".parse().unwrap();
        let mut v = FeatureVector::new();
        v.insert(id, 1.0).unwrap();
        assert!(v.insert(id, 2.0).is_err());
        assert!(FeatureVector::new().insert(id, f64::NAN).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = TransformConfig {
            levels: 2,
            csf: Some(crate::csf::CsfMethod::LiSW),
            use_sast: false,
            dh_ratio: 3.0,
        };
        let ids = all_feature_ids(&Channel::ALL, 2);
        let ex = Extractor::new(cfg, &CsfConfig::bundled(), FeatureParams::default(), &ids).unwrap();
        let r = clip(3, 32, 1);
        let d = clip(3, 32, 2);
        let a = ex.extract(&r, &d).unwrap();
        let b = ex.clone().with_frame_parallelism(true).extract(&r, &d).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pooled.len(), ids.len());
        let k = ids.iter().position(|i| i.to_string() == "Y-MAD-Ref@1").unwrap();
        assert!(a.per_frame.rows[0][k].is_none());
    }

    #[test]
    fn rejects_level_beyond_transform() {
        let cfg = TransformConfig::default();
        let ids = ["Y-SSIM@3".parse().unwrap()];
        assert!(Extractor::new(cfg, &CsfConfig::bundled(), FeatureParams::default(), &ids).is_err());
    }

    #[test]
    fn mismatched_videos() {
        let cfg = TransformConfig::default();
        let ids = ["Y-SSIM@1".parse().unwrap()];
        let ex = Extractor::new(cfg, &CsfConfig::bundled(), FeatureParams::default(), &ids).unwrap();
        assert!(ex.extract(&clip(2, 32, 1), &clip(3, 32, 1)).is_err());
    }
}
