//! Visual information fidelity and reduced-reference entropic differences
//! under a scalar Gaussian scale mixture model of wavelet coefficients.

use std::f64::consts::{E, PI};

use ndarray::{Array2, Zip};

use super::FeatureParams;
use crate::csf::Subband;
use crate::stats::{local_stats, local_variance, LocalStats};
use crate::transform::WaveletPyramid;

/// Reference variance below which the channel gain is taken as zero.
pub const GAIN_EPS: f64 = 1e-10;

/// Which subbands an information feature covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The approximation band at one level.
    A(usize),
    /// H and V bands at every level up to and including this one.
    HV(usize),
}

impl Variant {
    fn bands(self) -> Vec<(usize, Subband)> {
        match self {
            Variant::A(l) => vec![(l, Subband::A)],
            Variant::HV(l) => (1..=l).flat_map(|k| [(k, Subband::H), (k, Subband::V)]).collect(),
        }
    }
}

/// Per-position estimate of the distortion channel `y = g·x + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmChannel {
    pub g: Array2<f64>,
    pub sigma_v_sq: Array2<f64>,
    pub sigma_n_sq: f64,
}

pub fn fit_gsm_channel(stats: &LocalStats, sigma_n_sq: f64) -> GsmChannel {
    let g = Zip::from(&stats.cov_xy)
        .and(&stats.var_x)
        .map_collect(|&c, &vx| if vx < GAIN_EPS { 0.0 } else { c / vx });
    let sigma_v_sq = Zip::from(&stats.var_y)
        .and(&g)
        .and(&stats.cov_xy)
        .map_collect(|&vy, &g, &c| (vy - g * c).max(0.0));
    GsmChannel {
        g,
        sigma_v_sq,
        sigma_n_sq,
    }
}

fn window_for(band: &Array2<f64>, params: &FeatureParams) -> usize {
    params.window.min(band.nrows()).min(band.ncols()).max(1)
}

/// Numerator and denominator sums of the VIF ratio over one band pair.
pub fn vif_terms(x: &Array2<f64>, y: &Array2<f64>, params: &FeatureParams) -> (f64, f64) {
    let k = window_for(x, params);
    let st = local_stats(x, y, k, params.window_stride);
    let ch = fit_gsm_channel(&st, params.sigma_n_sq);
    let sn = params.sigma_n_sq;
    let mut num = 0.0;
    let mut den = 0.0;
    Zip::from(&ch.g)
        .and(&ch.sigma_v_sq)
        .and(&st.var_x)
        .for_each(|&g, &sv, &vx| {
            num += (1.0 + g * g * vx / (sv + sn)).ln();
            den += (1.0 + vx / sn).ln();
        });
    (num, den)
}

fn vif_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

pub fn vif(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, variant: Variant, params: &FeatureParams) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (l, sb) in variant.bands() {
        let (n, d) = vif_terms(pyr_x.band(l, sb), pyr_y.band(l, sb), params);
        num += n;
        den += d;
    }
    vif_ratio(num, den)
}

pub fn vif_a(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, level: usize, params: &FeatureParams) -> f64 {
    vif(pyr_x, pyr_y, Variant::A(level), params)
}

pub fn vif_hv(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, levels: usize, params: &FeatureParams) -> f64 {
    vif(pyr_x, pyr_y, Variant::HV(levels), params)
}

/// Spatial information-weighted entropy `log(1+σ²)·log(2πe(σ²+σn²))`.
pub fn spatial_entropy(var: &Array2<f64>, sigma_n_sq: f64) -> Array2<f64> {
    var.mapv(|s| (1.0 + s).ln() * (2.0 * PI * E * (s + sigma_n_sq)).ln())
}

/// Temporal entropy of a differenced band with variance `s²`, weighted by
/// both the band's own spatial variance `σ²` and `s²`.
pub fn temporal_entropy(var: &Array2<f64>, diff_var: &Array2<f64>, sigma_n_sq: f64) -> Array2<f64> {
    Zip::from(var)
        .and(diff_var)
        .map_collect(|&s, &d| (1.0 + s).ln() * (1.0 + d).ln() * (2.0 * PI * E * (d + sigma_n_sq)).ln())
}

fn abs_diff_sum(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &p, &q| acc + (p - q).abs())
}

/// Sum of |h_x − h_y| over one band pair and the number of terms.
pub fn srred_terms(x: &Array2<f64>, y: &Array2<f64>, params: &FeatureParams) -> (f64, usize) {
    let k = window_for(x, params);
    let hx = spatial_entropy(&local_variance(x, k, params.window_stride), params.sigma_n_sq);
    let hy = spatial_entropy(&local_variance(y, k, params.window_stride), params.sigma_n_sq);
    (abs_diff_sum(&hx, &hy), hx.len())
}

/// Sum of |g_x − g_y| over one band pair and its predecessor.
pub fn trred_terms(
    prev_x: &Array2<f64>,
    x: &Array2<f64>,
    prev_y: &Array2<f64>,
    y: &Array2<f64>,
    params: &FeatureParams,
) -> (f64, usize) {
    let k = window_for(x, params);
    let stride = params.window_stride;
    let sn = params.sigma_n_sq;
    let gx = temporal_entropy(&local_variance(x, k, stride), &local_variance(&(x - prev_x), k, stride), sn);
    let gy = temporal_entropy(&local_variance(y, k, stride), &local_variance(&(y - prev_y), k, stride), sn);
    (abs_diff_sum(&gx, &gy), gx.len())
}

pub fn srred(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, variant: Variant, params: &FeatureParams) -> f64 {
    let (mut s, mut n) = (0.0, 0);
    for (l, sb) in variant.bands() {
        let (a, b) = srred_terms(pyr_x.band(l, sb), pyr_y.band(l, sb), params);
        s += a;
        n += b;
    }
    s / n as f64
}

pub fn trred(
    prev_x: &WaveletPyramid,
    pyr_x: &WaveletPyramid,
    prev_y: &WaveletPyramid,
    pyr_y: &WaveletPyramid,
    variant: Variant,
    params: &FeatureParams,
) -> f64 {
    let (mut s, mut n) = (0.0, 0);
    for (l, sb) in variant.bands() {
        let (a, b) = trred_terms(
            prev_x.band(l, sb),
            pyr_x.band(l, sb),
            prev_y.band(l, sb),
            pyr_y.band(l, sb),
            params,
        );
        s += a;
        n += b;
    }
    s / n as f64
}

pub fn strred(
    prev_x: &WaveletPyramid,
    pyr_x: &WaveletPyramid,
    prev_y: &WaveletPyramid,
    pyr_y: &WaveletPyramid,
    variant: Variant,
    params: &FeatureParams,
) -> f64 {
    srred(pyr_x, pyr_y, variant, params) * trred(prev_x, pyr_x, prev_y, pyr_y, variant, params)
}
