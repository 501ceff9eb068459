//! Deterministic synthetic test clips: drifting gratings, a moving blob and
//! a fixed fine texture, generated on demand frame by frame.

use std::f64::consts::TAU;

use funque_core::io::{Channel, FramePlanes};
use funque_core::{FrameSource, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
struct Grating {
    amp: f64,
    /// Spatial frequency components, radians per pixel.
    kx: f64,
    ky: f64,
    phase: f64,
    /// Phase advance per frame.
    speed: f64,
}

impl Grating {
    fn random(rng: &mut ChaCha8Rng, amp: (f64, f64), freq: (f64, f64)) -> Self {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let f = rng.random_range(freq.0..freq.1) * TAU;
        Grating {
            amp: rng.random_range(amp.0..amp.1),
            kx: f * theta.cos(),
            ky: f * theta.sin(),
            phase: rng.random_range(0.0..TAU),
            speed: rng.random_range(0.1..0.5),
        }
    }

    fn at(&self, i: f64, j: f64, t: f64) -> f64 {
        self.amp * (self.kx * j + self.ky * i + self.phase + self.speed * t).sin()
    }
}

/// Hash of a pixel position to `[-1, 1)`.
fn texture(seed: u64, i: usize, j: usize) -> f64 {
    let mut h = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// A synthetic 4:2:0 clip; frames are quantized to integers in [16, 235].
#[derive(Debug, Clone)]
pub struct SynthClip {
    width: usize,
    height: usize,
    frames: usize,
    seed: u64,
    luma: [Grating; 3],
    chroma: [Grating; 2],
    blob_start: (f64, f64),
    blob_velocity: (f64, f64),
    blob_radius: f64,
}

impl SynthClip {
    /// Panics on odd or zero dimensions.
    pub fn new(width: usize, height: usize, frames: usize, seed: u64) -> Self {
        assert!(width > 0 && height > 0 && width.is_multiple_of(2) && height.is_multiple_of(2), "dimensions must be even");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let luma = [
            Grating::random(&mut rng, (20.0, 35.0), (0.01, 0.04)),
            Grating::random(&mut rng, (10.0, 20.0), (0.04, 0.12)),
            Grating::random(&mut rng, (5.0, 12.0), (0.12, 0.3)),
        ];
        let chroma = [
            Grating::random(&mut rng, (10.0, 25.0), (0.01, 0.05)),
            Grating::random(&mut rng, (10.0, 25.0), (0.01, 0.05)),
        ];
        let (w, h) = (width as f64, height as f64);
        SynthClip {
            width,
            height,
            frames,
            seed,
            luma,
            chroma,
            blob_start: (rng.random_range(0.0..h), rng.random_range(0.0..w)),
            blob_velocity: (rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0)),
            blob_radius: rng.random_range(0.08..0.2) * h.min(w),
        }
    }

    pub fn render(&self, t: usize) -> FramePlanes {
        let tf = t as f64;
        let (h, w) = (self.height, self.width);
        let (ci, cj) = (
            (self.blob_start.0 + self.blob_velocity.0 * tf).rem_euclid(h as f64),
            (self.blob_start.1 + self.blob_velocity.1 * tf).rem_euclid(w as f64),
        );
        let inv_r2 = 1.0 / (2.0 * self.blob_radius * self.blob_radius);
        let quantize = |v: f64| v.round().clamp(16.0, 235.0);
        let y = Array2::from_shape_fn((h, w), |(i, j)| {
            let (fi, fj) = (i as f64, j as f64);
            let g: f64 = self.luma.iter().map(|g| g.at(fi, fj, tf)).sum();
            let d2 = (fi - ci).powi(2) + (fj - cj).powi(2);
            quantize(128.0 + g + 50.0 * (-d2 * inv_r2).exp() + 8.0 * texture(self.seed, i, j))
        });
        let chroma = |k: usize| {
            Array2::from_shape_fn((h / 2, w / 2), |(i, j)| {
                let v = self.chroma[k].at(i as f64, j as f64, tf);
                quantize(128.0 + v + 4.0 * texture(self.seed ^ (k as u64 + 1), i, j))
            })
        };
        let mut f = FramePlanes::constant(w, h, 0.0);
        *f.plane_mut(Channel::Y) = y;
        *f.plane_mut(Channel::Cb) = chroma(0);
        *f.plane_mut(Channel::Cr) = chroma(1);
        f
    }

    pub fn to_frames(&self) -> Vec<FramePlanes> {
        (0..self.frames).map(|t| self.render(t)).collect()
    }
}

impl FrameSource for SynthClip {
    fn frame_count(&self) -> usize {
        self.frames
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn frame(&self, index: usize) -> Result<FramePlanes> {
        if index >= self.frames {
            return Err(funque_core::Error::FrameIndex {
                index,
                count: self.frames,
            });
        }
        Ok(self.render(index))
    }
}
