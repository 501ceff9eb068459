//! Conventional pixel-domain SSIM with a 9×9 Gaussian window (σ = 1.5),
//! used as a runtime reference point.

use ndarray::Array2;

use crate::error::Result;
use crate::extract::FrameSource;

pub const WINDOW: usize = 9;
pub const SIGMA: f64 = 1.5;

fn gaussian_taps() -> Vec<f64> {
    let half = (WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filtering of a row-major plane.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64], tmp: &mut Vec<f64>, out: &mut Vec<f64>) {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    tmp.clear();
    tmp.resize(h * ow, 0.0);
    for i in 0..h {
        let row = &src[i * w..(i + 1) * w];
        let dst = &mut tmp[i * ow..(i + 1) * ow];
        for (j, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, x) in taps.iter().zip(&row[j..j + k]) {
                acc += t * x;
            }
            *d = acc;
        }
    }
    out.clear();
    out.resize(oh * ow, 0.0);
    for i in 0..oh {
        let dst = &mut out[i * ow..(i + 1) * ow];
        for (t_idx, t) in taps.iter().enumerate() {
            let srow = &tmp[(i + t_idx) * ow..(i + t_idx + 1) * ow];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += t * s;
            }
        }
    }
}

/// Mean SSIM of two equally sized planes over the valid window positions.
pub fn gaussian_ssim(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    assert_eq!(x.dim(), y.dim());
    let (h, w) = x.dim();
    assert!(h >= WINDOW && w >= WINDOW, "plane smaller than the window");
    let taps = gaussian_taps();
    let xs = x.as_standard_layout();
    let ys = y.as_standard_layout();
    let xs = xs.as_slice().expect("standard layout");
    let ys = ys.as_slice().expect("standard layout");
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| a * b).collect();

    let mut tmp = Vec::new();
    let mut maps: [Vec<f64>; 5] = Default::default();
    for (src, dst) in [xs, ys, &xx[..], &yy[..], &xy[..]].into_iter().zip(maps.iter_mut()) {
        filter_valid(src, h, w, &taps, &mut tmp, dst);
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let [mx, my, sxx, syy, sxy] = &maps;
    let n = mx.len();
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = (mx[i], my[i]);
        let vx = sxx[i] - a * a;
        let vy = syy[i] - b * b;
        let c = sxy[i] - a * b;
        total += ((2.0 * a * b + c1) * (2.0 * c + c2)) / ((a * a + b * b + c1) * (vx + vy + c2));
    }
    total / n as f64
}

/// Luma SSIM averaged over all frames.
pub fn gaussian_ssim_video(reference: &dyn FrameSource, distorted: &dyn FrameSource) -> Result<f64> {
    let n = reference.frame_count();
    let mut acc = 0.0;
    for t in 0..n {
        let r = reference.frame(t)?;
        let d = distorted.frame(t)?;
        acc += gaussian_ssim(&r.y, &d.y);
    }
    Ok(acc / n as f64)
}
