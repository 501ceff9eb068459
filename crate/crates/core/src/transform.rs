//! The shared front end: optional viewing-distance downscale, contrast
//! sensitivity, and an L-level Haar decomposition.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::csf::{build_channel_csf, ChannelCsf, CsfConfig, CsfMethod, Subband, DEFAULT_DH_RATIO};
use crate::error::{Error, Result};
use crate::io::Channel;

pub const MAX_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    pub levels: usize,
    /// `None` runs a plain Haar transform.
    pub csf: Option<CsfMethod>,
    pub use_sast: bool,
    pub dh_ratio: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            levels: 2,
            csf: Some(CsfMethod::NadenauSW),
            use_sast: true,
            dh_ratio: DEFAULT_DH_RATIO,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::InvalidConfig(format!(
                "levels must be in 1..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        if !(self.dh_ratio > 0.0 && self.dh_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dh_ratio must be positive, got {}",
                self.dh_ratio
            )));
        }
        Ok(())
    }

    pub fn sast_factor(&self) -> usize {
        if self.use_sast {
            sast_factor(self.dh_ratio)
        } else {
            1
        }
    }
}

/// Integer downscale factor for a viewing distance of `dh_ratio` heights.
pub fn sast_factor(dh_ratio: f64) -> usize {
    ((dh_ratio / 1.618).round() as usize).max(1)
}

/// Mean over disjoint `factor`×`factor` blocks; trailing rows and columns that
/// do not fill a block are dropped.
pub fn sast_downscale(plane: &Array2<f64>, factor: usize) -> Array2<f64> {
    assert!(factor >= 1, "downscale factor must be positive");
    if factor == 1 {
        return plane.clone();
    }
    let (h, w) = plane.dim();
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Array2::zeros((oh, ow));
    let norm = 1.0 / (factor * factor) as f64;
    for (oi, mut orow) in out.rows_mut().into_iter().enumerate() {
        for r in oi * factor..(oi + 1) * factor {
            let src = plane.row(r);
            for (oj, o) in orow.iter_mut().enumerate() {
                let base = oj * factor;
                let mut acc = 0.0;
                for c in base..base + factor {
                    acc += src[c];
                }
                *o += acc;
            }
        }
        orow.mapv_inplace(|v| v * norm);
    }
    out
}

/// One level of Haar subbands.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarBands {
    pub a: Array2<f64>,
    pub h: Array2<f64>,
    pub v: Array2<f64>,
    pub d: Array2<f64>,
}

impl HaarBands {
    pub fn band(&self, subband: Subband) -> &Array2<f64> {
        match subband {
            Subband::A => &self.a,
            Subband::H => &self.h,
            Subband::V => &self.v,
            Subband::D => &self.d,
        }
    }

    fn band_mut(&mut self, subband: Subband) -> &mut Array2<f64> {
        match subband {
            Subband::A => &mut self.a,
            Subband::H => &mut self.h,
            Subband::V => &mut self.v,
            Subband::D => &mut self.d,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.a.dim()
    }
}

/// One-level orthonormal Haar transform over 2×2 blocks `[a b; c d]`:
/// A = (a+b+c+d)/2, H = (a-b+c-d)/2, V = (a+b-c-d)/2, D = (a-b-c+d)/2.
///
/// Panics if either dimension is odd.
pub fn haar_dwt(plane: &Array2<f64>) -> HaarBands {
    let (h, w) = plane.dim();
    assert!(h % 2 == 0 && w % 2 == 0, "haar_dwt needs even dimensions, got {h}x{w}");
    let (oh, ow) = (h / 2, w / 2);
    let src = plane.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut a = vec![0.0; oh * ow];
    let mut hb = vec![0.0; oh * ow];
    let mut vb = vec![0.0; oh * ow];
    let mut db = vec![0.0; oh * ow];
    for i in 0..oh {
        let r0 = &src[2 * i * w..(2 * i + 1) * w];
        let r1 = &src[(2 * i + 1) * w..(2 * i + 2) * w];
        let o = i * ow;
        for j in 0..ow {
            let (p, q) = (r0[2 * j], r0[2 * j + 1]);
            let (r, t) = (r1[2 * j], r1[2 * j + 1]);
            a[o + j] = 0.5 * (p + q + r + t);
            hb[o + j] = 0.5 * (p - q + r - t);
            vb[o + j] = 0.5 * (p + q - r - t);
            db[o + j] = 0.5 * (p - q - r + t);
        }
    }
    let mk = |v| Array2::from_shape_vec((oh, ow), v).expect("band size");
    HaarBands {
        a: mk(a),
        h: mk(hb),
        v: mk(vb),
        d: mk(db),
    }
}

/// L-level decomposition; `levels[0]` is level 1 (finest).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub levels: Vec<HaarBands>,
}

impl WaveletPyramid {
    /// Plain recursive Haar decomposition of a plane whose sides are
    /// divisible by `2^levels`.
    pub fn decompose(plane: &Array2<f64>, levels: usize) -> Self {
        let mut out = Vec::with_capacity(levels);
        let mut bands = haar_dwt(plane);
        for _ in 1..levels {
            let next = haar_dwt(&bands.a);
            out.push(bands);
            bands = next;
        }
        out.push(bands);
        WaveletPyramid { levels: out }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Subbands of `level` (1-based).
    pub fn level(&self, level: usize) -> &HaarBands {
        &self.levels[level - 1]
    }

    pub fn band(&self, level: usize, subband: Subband) -> &Array2<f64> {
        self.level(level).band(subband)
    }
}

fn crop_to_multiple(plane: &Array2<f64>, m: usize) -> Array2<f64> {
    let (h, w) = plane.dim();
    let (ch, cw) = (h - h % m, w - w % m);
    if (ch, cw) == (h, w) {
        plane.clone()
    } else {
        plane.slice(s![..ch, ..cw]).to_owned()
    }
}

/// A configured transform with its per-channel CSF instantiated.
#[derive(Debug, Clone)]
pub struct UnifiedTransform {
    cfg: TransformConfig,
    csf: [Option<ChannelCsf>; 3],
}

impl UnifiedTransform {
    /// Instantiates the CSF for each of `channels`.
    pub fn new(cfg: TransformConfig, csf_config: &CsfConfig, channels: &[Channel]) -> Result<Self> {
        cfg.validate()?;
        let mut csf: [Option<ChannelCsf>; 3] = [None, None, None];
        if let Some(method) = cfg.csf {
            for &ch in channels {
                csf[ch as usize] = Some(build_channel_csf(method, ch, cfg.levels, cfg.dh_ratio, csf_config)?);
            }
        }
        Ok(UnifiedTransform { cfg, csf })
    }

    pub fn config(&self) -> &TransformConfig {
        &self.cfg
    }

    pub fn apply(&self, plane: &Array2<f64>, channel: Channel) -> Result<WaveletPyramid> {
        let csf = match self.cfg.csf {
            Some(method) => Some(self.csf[channel as usize].as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("{method} was not instantiated for channel {channel}"))
            })?),
            None => None,
        };

        let factor = self.cfg.sast_factor();
        let scaled;
        let plane = if factor > 1 {
            scaled = sast_downscale(plane, factor);
            &scaled
        } else {
            plane
        };

        let block = 1usize << self.cfg.levels;
        let (h, w) = plane.dim();
        if h < block || w < block {
            return Err(Error::InputTooSmall {
                width: w,
                height: h,
                levels: self.cfg.levels,
            });
        }
        let mut work = crop_to_multiple(plane, block);

        if let Some(ChannelCsf::Spatial(filter)) = csf {
            work = filter.apply(&work);
        }
        let mut pyr = WaveletPyramid::decompose(&work, self.cfg.levels);
        if let Some(ChannelCsf::Weights(weights)) = csf {
            for (i, bands) in pyr.levels.iter_mut().enumerate() {
                for sb in Subband::ALL {
                    let wgt = weights.get(i + 1, sb);
                    if wgt != 1.0 {
                        bands.band_mut(sb).mapv_inplace(|x| x * wgt);
                    }
                }
            }
        }
        Ok(pyr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csf::li_subband_weights;
    use ndarray::array;

    #[test]
    fn sast_factors() {
        assert_eq!(sast_factor(3.0), 2);
        assert_eq!(sast_factor(1.618), 1);
        assert_eq!(sast_factor(4.9), 3);
        assert_eq!(sast_factor(0.2), 1);
    }

    #[test]
    fn downscale_block_mean() {
        assert_eq!(sast_downscale(&array![[0.0, 2.0], [4.0, 6.0]], 2), array![[3.0]]);
        let p = Array2::from_shape_fn((7, 8), |(i, j)| (i * 8 + j) as f64);
        let d = sast_downscale(&p, 3);
        assert_eq!(d.dim(), (2, 2));
        let oracle: f64 = (3..6).flat_map(|i| (3..6).map(move |j| (i * 8 + j) as f64)).sum::<f64>() / 9.0;
        assert_eq!(d[[1, 1]], oracle);
        assert_eq!(sast_downscale(&p, 1), p);
    }

    #[test]
    fn haar_blocks() {
        let b = haar_dwt(&array![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!((b.a[[0, 0]], b.h[[0, 0]], b.v[[0, 0]], b.d[[0, 0]]), (2.0, 0.0, 0.0, 0.0));
        let b = haar_dwt(&array![[2.0, 0.0], [0.0, 0.0]]);
        assert_eq!((b.a[[0, 0]], b.h[[0, 0]], b.v[[0, 0]], b.d[[0, 0]]), (1.0, 1.0, 1.0, 1.0));
        let b = haar_dwt(&array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!((b.a[[0, 0]], b.h[[0, 0]], b.v[[0, 0]], b.d[[0, 0]]), (5.0, -1.0, -2.0, 0.0));
    }

    #[test]
    #[should_panic]
    fn haar_rejects_odd() {
        haar_dwt(&Array2::zeros((3, 4)));
    }

    #[test]
    fn too_small_after_sast() {
        let cfg = TransformConfig {
            levels: 3,
            csf: None,
            use_sast: true,
            dh_ratio: 3.0,
        };
        let t = UnifiedTransform::new(cfg, &CsfConfig::bundled(), &[Channel::Y]).unwrap();
        let err = t.apply(&Array2::zeros((14, 64)), Channel::Y).unwrap_err();
        assert!(matches!(err, Error::InputTooSmall { .. }));
        assert!(t.apply(&Array2::zeros((16, 16)), Channel::Y).is_ok());
    }

    #[test]
    fn invalid_levels() {
        let cfg = TransformConfig {
            levels: 5,
            ..TransformConfig::default()
        };
        assert!(UnifiedTransform::new(cfg, &CsfConfig::bundled(), &[Channel::Y]).is_err());
    }

    #[test]
    fn crop_removes_bottom_right() {
        let cfg = TransformConfig {
            levels: 2,
            csf: None,
            use_sast: false,
            dh_ratio: 3.0,
        };
        let t = UnifiedTransform::new(cfg, &CsfConfig::bundled(), &[Channel::Y]).unwrap();
        let p = Array2::from_shape_fn((10, 13), |(i, j)| (i * 13 + j) as f64);
        let pyr = t.apply(&p, Channel::Y).unwrap();
        assert_eq!(pyr.level(1).dim(), (4, 6));
        assert_eq!(pyr.level(2).dim(), (2, 3));
        let direct = WaveletPyramid::decompose(&p.slice(s![..8, ..12]).to_owned(), 2);
        assert_eq!(pyr, direct);
    }

    #[test]
    fn li_weights_applied_after_dwt() {
        let cfg = TransformConfig {
            levels: 2,
            csf: Some(CsfMethod::LiSW),
            use_sast: false,
            dh_ratio: 3.0,
        };
        let t = UnifiedTransform::new(cfg, &CsfConfig::bundled(), &[Channel::Y]).unwrap();
        let p = Array2::from_shape_fn((8, 8), |(i, j)| ((i * 31 + j * 17) % 13) as f64);
        let pyr = t.apply(&p, Channel::Y).unwrap();
        let plain = WaveletPyramid::decompose(&p, 2);
        let w = li_subband_weights(2, 3.0);
        for l in 1..=2 {
            for sb in Subband::ALL {
                let expect = plain.band(l, sb).mapv(|x| x * w.get(l, sb));
                assert_eq!(pyr.band(l, sb), &expect);
            }
        }
    }
}
