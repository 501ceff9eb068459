//! Detail loss: split distorted detail coefficients into a restored part
//! (attenuated reference detail) and an additive impairment, mask the former
//! by the latter, and compare detail energy per scale.

use ndarray::{s, Array2, Zip};

use super::FeatureParams;
use crate::csf::Subband;
use crate::transform::WaveletPyramid;

/// Fraction of each side trimmed from both ends before pooling.
pub const BORDER_FRACTION: f64 = 0.1;

/// Restored and additive parts of the three detail bands at one level,
/// indexed H, V, D.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledBands {
    pub restored: [Array2<f64>; 3],
    pub additive: [Array2<f64>; 3],
    /// Orientation difference between reference and distorted, degrees.
    pub delta_psi: Array2<f64>,
}

/// Absolute angular distance in degrees, folded into [0, 180].
fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().to_degrees();
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

pub fn decouple(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize, params: &FeatureParams) -> DecoupledBands {
    let (bx, by) = (pyr_x.level(level), pyr_y.level(level));
    let delta_psi = Zip::from(&bx.h)
        .and(&bx.v)
        .and(&by.h)
        .and(&by.v)
        .map_collect(|&xh, &xv, &yh, &yv| angle_between(xv.atan2(xh), yv.atan2(yh)));

    let split = |sb: Subband| {
        let (x, y) = (bx.band(sb), by.band(sb));
        let restored = Zip::from(x).and(y).and(&delta_psi).map_collect(|&x, &y, &dpsi| {
            if x == 0.0 {
                0.0
            } else if dpsi < params.dlm_angle_deg {
                y
            } else {
                let g = y / x;
                if g <= 0.0 {
                    0.0
                } else if g >= 1.0 {
                    x
                } else {
                    y
                }
            }
        });
        let additive = y - &restored;
        (restored, additive)
    };
    let (rh, ah) = split(Subband::H);
    let (rv, av) = split(Subband::V);
    let (rd, ad) = split(Subband::D);
    DecoupledBands {
        restored: [rh, rv, rd],
        additive: [ah, av, ad],
        delta_psi,
    }
}

/// Contrast mask: for every position, the 3×3 neighbourhood of |additive|
/// summed over the three bands, with weight 1/30 and 2/30 at the centre.
/// Positions outside the band count as zero.
pub fn mask(decoupled: &DecoupledBands) -> Array2<f64> {
    let total = decoupled
        .additive
        .iter()
        .fold(Array2::zeros(decoupled.delta_psi.raw_dim()), |acc: Array2<f64>, a| acc + a.mapv(f64::abs));
    let (h, w) = total.dim();
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        let r0 = i.saturating_sub(1);
        let r1 = (i + 1).min(h - 1);
        for j in 0..w {
            let c0 = j.saturating_sub(1);
            let c1 = (j + 1).min(w - 1);
            let mut acc = total[[i, j]];
            for r in r0..=r1 {
                for c in c0..=c1 {
                    acc += total[[r, c]];
                }
            }
            out[[i, j]] = acc / 30.0;
        }
    }
    out
}

/// Restored magnitudes that survive the mask: `(|R̂| − M)^+`.
pub fn masked_restore(decoupled: &DecoupledBands, mask: &Array2<f64>) -> [Array2<f64>; 3] {
    decoupled
        .restored
        .clone()
        .map(|r| Zip::from(&r).and(mask).map_collect(|&r, &m| (r.abs() - m).max(0.0)))
}

fn border(n: usize) -> usize {
    (BORDER_FRACTION * n as f64 + 0.5).floor() as usize
}

/// The central region of a band, or the whole band when trimming would
/// leave nothing.
fn center(a: &Array2<f64>) -> ndarray::ArrayView2<'_, f64> {
    let (h, w) = a.dim();
    let (bh, bw) = (border(h), border(w));
    if 2 * bh >= h || 2 * bw >= w {
        a.view()
    } else {
        a.slice(s![bh..h - bh, bw..w - bw])
    }
}

fn cube_root_sum<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.map(|v| v.abs().powi(3)).sum::<f64>().cbrt()
}

/// Detail loss at one scale: masked restored energy over reference energy,
/// in the cube-root domain, over the central region. A blank reference
/// level scores 1.
pub fn dlm_scale(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize, params: &FeatureParams) -> f64 {
    let dec = decouple(pyr_x, pyr_y, level, params);
    let m = mask(&dec);
    let kept = masked_restore(&dec, &m);
    let bx = pyr_x.level(level);
    let num: f64 = kept.iter().map(|r| cube_root_sum(center(r).iter())).sum();
    let den: f64 = [&bx.h, &bx.v, &bx.d]
        .iter()
        .map(|x| cube_root_sum(center(x).iter()))
        .sum();
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}
