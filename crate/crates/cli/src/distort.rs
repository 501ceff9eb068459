//! Synthetic distortions with a scalar severity; severity 0 is the identity.

use std::fmt;
use std::str::FromStr;

use funque_core::io::{Channel, FramePlanes};
use funque_core::{FrameSource, Result};
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distortion {
    /// Additive white Gaussian noise; severity is the standard deviation.
    GaussianNoise,
    /// Separable Gaussian blur; severity is the kernel sigma in pixels.
    GaussianBlur,
    /// Rounding to multiples of a step; severity is the step.
    UniformQuantize,
}

impl Distortion {
    pub const ALL: [Distortion; 3] = [
        Distortion::GaussianNoise,
        Distortion::GaussianBlur,
        Distortion::UniformQuantize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Distortion::GaussianNoise => "gaussian_noise",
            Distortion::GaussianBlur => "gaussian_blur",
            Distortion::UniformQuantize => "uniform_quantize",
        }
    }

    /// Five increasing severities used by the synthetic dataset generator.
    pub fn default_severities(self) -> [f64; 5] {
        match self {
            Distortion::GaussianNoise => [2.0, 4.0, 8.0, 16.0, 32.0],
            Distortion::GaussianBlur => [0.5, 1.0, 1.5, 2.5, 4.0],
            Distortion::UniformQuantize => [6.0, 12.0, 24.0, 48.0, 96.0],
        }
    }

    /// Applies the distortion to all three planes. `seed` only matters for
    /// noise; results are rounded and clipped to [0, 255].
    pub fn apply(self, frame: &FramePlanes, severity: f64, seed: u64) -> FramePlanes {
        assert!(severity >= 0.0 && severity.is_finite(), "severity must be finite and >= 0");
        if severity == 0.0 {
            return frame.clone();
        }
        let mut out = frame.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ch in Channel::ALL {
            let p = out.plane_mut(ch);
            match self {
                Distortion::GaussianNoise => {
                    let n = Normal::new(0.0, severity).expect("valid sigma");
                    p.mapv_inplace(|v| v + n.sample(&mut rng));
                }
                Distortion::GaussianBlur => *p = gaussian_blur(p, severity),
                Distortion::UniformQuantize => p.mapv_inplace(|v| (v / severity).round() * severity),
            }
            p.mapv_inplace(|v| v.round().clamp(0.0, 255.0));
        }
        out
    }
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distortion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Distortion::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown distortion `{s}` (expected gaussian_noise, gaussian_blur or uniform_quantize)"))
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let k: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Mirror index with period `2n` (edge sample repeated).
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

pub fn gaussian_blur(p: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut cur = p.clone();
    for axis in [Axis(1), Axis(0)] {
        let mut next = Array2::zeros(cur.raw_dim());
        for (src, mut dst) in cur.lanes(axis).into_iter().zip(next.lanes_mut(axis)) {
            let n = src.len();
            for i in 0..n {
                dst[i] = k
                    .iter()
                    .enumerate()
                    .map(|(t, w)| w * src[mirror(i as isize + t as isize - r, n)])
                    .sum();
            }
        }
        cur = next;
    }
    cur
}

/// A distorted view of another source; noise is seeded per frame.
pub struct Distorted<'a> {
    pub source: &'a dyn FrameSource,
    pub distortion: Distortion,
    pub severity: f64,
    pub seed: u64,
}

impl FrameSource for Distorted<'_> {
    fn frame_count(&self) -> usize {
        self.source.frame_count()
    }

    fn dims(&self) -> (usize, usize) {
        self.source.dims()
    }

    fn frame(&self, index: usize) -> Result<FramePlanes> {
        let f = self.source.frame(index)?;
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
        Ok(self.distortion.apply(&f, self.severity, seed))
    }
}
