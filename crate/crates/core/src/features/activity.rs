//! Spatial activity and sharpness features, plus mean absolute differences
//! of approximation bands.

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{Array2, Axis, Zip};

use super::{mean, std_dev};
use crate::transform::WaveletPyramid;

/// Fraction of the largest energies averaged by [`tl_blur`].
pub const TOP_FRACTION: f64 = 0.01;

/// First-order gradient energy `H² + V²`.
pub fn gradient_energy(pyr: &WaveletPyramid, level: usize) -> Array2<f64> {
    let b = pyr.level(level);
    Zip::from(&b.h).and(&b.v).map_collect(|&h, &v| h * h + v * v)
}

/// Haar high-pass `(x[n] − x[n+1])/√2` along `axis`, repeating the last
/// sample at the far edge.
pub fn highpass(x: &Array2<f64>, axis: Axis) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for (src, mut dst) in x.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let n = src.len();
        for i in 0..n {
            let next = src[(i + 1).min(n - 1)];
            dst[i] = (src[i] - next) * FRAC_1_SQRT_2;
        }
    }
    out
}

/// Second-order gradient energy: H high-passed along rows, V along columns.
pub fn second_order_energy(pyr: &WaveletPyramid, level: usize) -> Array2<f64> {
    let b = pyr.level(level);
    let fh = highpass(&b.h, Axis(1));
    let fv = highpass(&b.v, Axis(0));
    Zip::from(&fh).and(&fv).map_collect(|&a, &b| a * a + b * b)
}

/// Fourth root of the population std of gradient magnitude.
pub fn tl_sai(pyr: &WaveletPyramid, level: usize) -> f64 {
    std_dev(&gradient_energy(pyr, level).mapv(f64::sqrt)).powf(0.25)
}

/// Mean of the largest `ceil(fraction · n)` values (at least one).
pub fn top_mean(map: &Array2<f64>, fraction: f64) -> f64 {
    let mut v: Vec<f64> = map.iter().copied().collect();
    let n = v.len();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let pivot = n - k;
    v.select_nth_unstable_by(pivot, f64::total_cmp);
    v[pivot..].iter().sum::<f64>() / k as f64
}

/// Ratio of strongest second-order to strongest first-order energy; 0 for a
/// frame with no gradient energy.
pub fn tl_blur(pyr: &WaveletPyramid, level: usize) -> f64 {
    let den = top_mean(&gradient_energy(pyr, level), TOP_FRACTION);
    if den == 0.0 {
        0.0
    } else {
        top_mean(&second_order_energy(pyr, level), TOP_FRACTION) / den
    }
}

pub fn delta_tl_sai(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize) -> f64 {
    tl_sai(pyr_x, level) - tl_sai(pyr_y, level)
}

pub fn delta_tl_blur(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize) -> f64 {
    tl_blur(pyr_x, level) - tl_blur(pyr_y, level)
}

/// Mean absolute difference of two approximation bands.
pub fn mad(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &p, &q| acc + (p - q).abs()) / a.len() as f64
}

/// Mean positive part of the per-position detail-magnitude difference
/// `Σθ |X| − |Y|`.
fn magnitude_excess(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize) -> f64 {
    let (bx, by) = (pyr_x.level(level), pyr_y.level(level));
    let mut acc = Array2::<f64>::zeros(bx.dim());
    for (x, y) in [(&bx.h, &by.h), (&bx.v, &by.v), (&bx.d, &by.d)] {
        Zip::from(&mut acc).and(x).and(y).for_each(|a, &x, &y| *a += x.abs() - y.abs());
    }
    mean(&acc.mapv(|v| v.max(0.0)))
}

pub fn blur(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize) -> f64 {
    magnitude_excess(pyr_x, pyr_y, level)
}

pub fn edge(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize) -> f64 {
    magnitude_excess(pyr_y, pyr_x, level)
}
