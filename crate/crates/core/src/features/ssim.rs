//! Structural similarity from Haar coefficients.
//!
//! Level-λ statistics describe disjoint 2^λ×2^λ pixel blocks. They are built
//! recursively: each level adds its own detail energy to a quarter of the
//! 2×2 block sum of the previous level's (co)variances.

use ndarray::{Array2, Zip};

use super::{pool, FeatureParams, Pool};
use crate::error::Result;
use crate::transform::{HaarBands, WaveletPyramid};

/// Exponents of the five-scale product, finest first.
pub const MS_EXPONENTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Floor for a negative base raised to a fractional exponent.
const BASE_FLOOR: f64 = 1e-12;

/// Block statistics at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub mu_x: Array2<f64>,
    pub mu_y: Array2<f64>,
    pub var_x: Array2<f64>,
    pub var_y: Array2<f64>,
    pub cov_xy: Array2<f64>,
}

/// Statistics for levels `1..=L`; index 0 is level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleStats {
    pub levels: Vec<LevelStats>,
}

impl ScaleStats {
    pub fn level(&self, level: usize) -> &LevelStats {
        &self.levels[level - 1]
    }
}

fn detail_products(x: &HaarBands, y: &HaarBands, scale: f64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = x.a.len();
    let mut vx = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    let mut cxy = Vec::with_capacity(n);
    let bands = [&x.h, &x.v, &x.d, &y.h, &y.v, &y.d].map(|b| b.as_slice().expect("standard layout"));
    let [xh, xv, xd, yh, yv, yd] = bands;
    for i in 0..n {
        vx.push(scale * (xh[i] * xh[i] + xv[i] * xv[i] + xd[i] * xd[i]));
        vy.push(scale * (yh[i] * yh[i] + yv[i] * yv[i] + yd[i] * yd[i]));
        cxy.push(scale * (xh[i] * yh[i] + xv[i] * yv[i] + xd[i] * yd[i]));
    }
    let mk = |v| Array2::from_shape_vec(x.dim(), v).expect("band size");
    (mk(vx), mk(vy), mk(cxy))
}

/// Adds a quarter of the 2×2 block sums of `prev` into `acc`.
fn add_quarter_block_sum(acc: &mut Array2<f64>, prev: &Array2<f64>) {
    for ((i, j), a) in acc.indexed_iter_mut() {
        let (r, c) = (2 * i, 2 * j);
        *a += 0.25 * (prev[[r, c]] + prev[[r, c + 1]] + prev[[r + 1, c]] + prev[[r + 1, c + 1]]);
    }
}

/// Block means, variances and covariances at every level up to `levels`.
///
/// Panics if the pyramids are shallower than `levels` or differ in shape.
pub fn scale_stats(pyr_x: &WaveletPyramid, pyr_y: &WaveletPyramid, levels: usize) -> ScaleStats {
    assert!(pyr_x.depth() >= levels && pyr_y.depth() >= levels, "pyramid too shallow");
    let mut out: Vec<LevelStats> = Vec::with_capacity(levels);
    for l in 1..=levels {
        let (bx, by) = (pyr_x.level(l), pyr_y.level(l));
        assert_eq!(bx.dim(), by.dim(), "pyramid shapes differ at level {l}");
        let scale = 0.25f64.powi(l as i32);
        let (mut var_x, mut var_y, mut cov_xy) = detail_products(bx, by, scale);
        if let Some(prev) = out.last() {
            add_quarter_block_sum(&mut var_x, &prev.var_x);
            add_quarter_block_sum(&mut var_y, &prev.var_y);
            add_quarter_block_sum(&mut cov_xy, &prev.cov_xy);
        }
        let mscale = 0.5f64.powi(l as i32);
        out.push(LevelStats {
            mu_x: bx.a.mapv(|a| a * mscale),
            mu_y: by.a.mapv(|a| a * mscale),
            var_x,
            var_y,
            cov_xy,
        });
    }
    ScaleStats { levels: out }
}

pub fn luminance_map(stats: &LevelStats, k1: f64) -> Array2<f64> {
    Zip::from(&stats.mu_x)
        .and(&stats.mu_y)
        .map_collect(|&x, &y| (2.0 * x * y + k1) / (x * x + y * y + k1))
}

pub fn cs_map(stats: &LevelStats, k2: f64) -> Array2<f64> {
    Zip::from(&stats.cov_xy)
        .and(&stats.var_x)
        .and(&stats.var_y)
        .map_collect(|&c, &vx, &vy| (2.0 * c + k2) / (vx + vy + k2))
}

/// Local SSIM map (luminance times contrast-structure).
pub fn ssim_map(stats: &LevelStats, k1: f64, k2: f64) -> Array2<f64> {
    luminance_map(stats, k1) * cs_map(stats, k2)
}

/// Mean-pooled SSIM at `level`.
pub fn ssim(stats: &ScaleStats, level: usize, params: &FeatureParams) -> Result<f64> {
    pool(&ssim_map(stats.level(level), params.k1, params.k2), Pool::Mean)
}

/// CoV-pooled SSIM at `level` (0 for identical inputs).
pub fn essim(stats: &ScaleStats, level: usize, params: &FeatureParams) -> Result<f64> {
    pool(&ssim_map(stats.level(level), params.k1, params.k2), Pool::CoV)
}

/// Exponents for an `levels`-scale product: the leading entries of
/// [`MS_EXPONENTS`] rescaled to sum to one.
pub fn ms_exponents(levels: usize) -> Vec<f64> {
    let head = &MS_EXPONENTS[..levels.min(MS_EXPONENTS.len())];
    let total: f64 = head.iter().sum();
    head.iter().map(|a| a / total).collect()
}

/// A multi-scale product with a flag set when a negative base was floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiScale {
    pub value: f64,
    pub clamped: bool,
}

fn multi_scale(stats: &ScaleStats, levels: usize, params: &FeatureParams, method: Pool) -> Result<MultiScale> {
    let alpha = ms_exponents(levels);
    let mut value = 1.0;
    let mut clamped = false;
    for (i, a) in alpha.iter().enumerate() {
        let st = &stats.levels[i];
        let base = if i + 1 == levels {
            pool(&ssim_map(st, params.k1, params.k2), method)?
        } else {
            pool(&cs_map(st, params.k2), method)?
        };
        let base = if base < 0.0 {
            clamped = true;
            BASE_FLOOR
        } else {
            base
        };
        value *= base.powf(*a);
    }
    Ok(MultiScale { value, clamped })
}

/// Product over levels `1..=levels`: mean-pooled contrast-structure below
/// the top level, mean-pooled SSIM at it.
pub fn ms_ssim(stats: &ScaleStats, levels: usize, params: &FeatureParams) -> Result<MultiScale> {
    multi_scale(stats, levels, params, Pool::Mean)
}

/// As [`ms_ssim`] with CoV pooling; 0 for identical inputs.
pub fn ms_essim(stats: &ScaleStats, levels: usize, params: &FeatureParams) -> Result<MultiScale> {
    multi_scale(stats, levels, params, Pool::CoV)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..255.0))
    }

    fn pair(n: usize, levels: usize) -> (Array2<f64>, Array2<f64>, WaveletPyramid, WaveletPyramid) {
        let x = random(n, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = x.mapv(|v| 0.8 * v + rng.random_range(-20.0..20.0));
        let px = WaveletPyramid::decompose(&x, levels);
        let py = WaveletPyramid::decompose(&y, levels);
        (x, y, px, py)
    }

    /// Population statistics over disjoint b×b pixel blocks.
    fn block_oracle(x: &Array2<f64>, y: &Array2<f64>, b: usize) -> LevelStats {
        let (h, w) = (x.nrows() / b, x.ncols() / b);
        let mut st = LevelStats {
            mu_x: Array2::zeros((h, w)),
            mu_y: Array2::zeros((h, w)),
            var_x: Array2::zeros((h, w)),
            var_y: Array2::zeros((h, w)),
            cov_xy: Array2::zeros((h, w)),
        };
        let n = (b * b) as f64;
        for i in 0..h {
            for j in 0..w {
                let bx = x.slice(ndarray::s![i * b..(i + 1) * b, j * b..(j + 1) * b]);
                let by = y.slice(ndarray::s![i * b..(i + 1) * b, j * b..(j + 1) * b]);
                let mx = bx.sum() / n;
                let my = by.sum() / n;
                let mut vx = 0.0;
                let mut vy = 0.0;
                let mut c = 0.0;
                for (a, b) in bx.iter().zip(by.iter()) {
                    vx += (a - mx) * (a - mx);
                    vy += (b - my) * (b - my);
                    c += (a - mx) * (b - my);
                }
                st.mu_x[[i, j]] = mx;
                st.mu_y[[i, j]] = my;
                st.var_x[[i, j]] = vx / n;
                st.var_y[[i, j]] = vy / n;
                st.cov_xy[[i, j]] = c / n;
            }
        }
        st
    }

    fn assert_close(a: &Array2<f64>, b: &Array2<f64>, rel: f64) {
        assert_eq!(a.dim(), b.dim());
        for (p, q) in a.iter().zip(b.iter()) {
            assert!((p - q).abs() <= rel * q.abs().max(1.0), "{p} vs {q}");
        }
    }

    #[test]
    fn recursion_matches_block_statistics() {
        let (x, y, px, py) = pair(32, 3);
        let st = scale_stats(&px, &py, 3);
        for l in 1..=3 {
            let o = block_oracle(&x, &y, 1 << l);
            let s = st.level(l);
            assert_close(&s.mu_x, &o.mu_x, 1e-9);
            assert_close(&s.mu_y, &o.mu_y, 1e-9);
            assert_close(&s.var_x, &o.var_x, 1e-6);
            assert_close(&s.var_y, &o.var_y, 1e-6);
            assert_close(&s.cov_xy, &o.cov_xy, 1e-6);
        }
    }

    #[test]
    fn ms_ssim_matches_spatial_oracle() {
        let (x, y, px, py) = pair(32, 2);
        let p = FeatureParams::default();
        let st = scale_stats(&px, &py, 2);
        let o1 = block_oracle(&x, &y, 2);
        let o2 = block_oracle(&x, &y, 4);
        let cs1: f64 = cs_map(&o1, p.k2).mean().unwrap();
        let s2: f64 = ssim_map(&o2, p.k1, p.k2).mean().unwrap();
        let a = ms_exponents(2);
        let expect = cs1.powf(a[0]) * s2.powf(a[1]);
        let got = ms_ssim(&st, 2, &p).unwrap();
        assert!((got.value - expect).abs() < 1e-5);
        assert!(!got.clamped);

        let cs1 = pool(&cs_map(&o1, p.k2), Pool::CoV).unwrap();
        let s2 = pool(&ssim_map(&o2, p.k1, p.k2), Pool::CoV).unwrap();
        let expect = cs1.powf(a[0]) * s2.powf(a[1]);
        assert!((ms_essim(&st, 2, &p).unwrap().value - expect).abs() < 1e-5);
    }

    #[test]
    fn identical_frames() {
        let (x, _, px, _) = pair(32, 3);
        let p = FeatureParams::default();
        let st = scale_stats(&px, &px, 3);
        for l in &st.levels {
            assert_eq!(l.var_x, l.cov_xy);
        }
        for l in 1..=3 {
            assert_eq!(ms_ssim(&st, l, &p).unwrap().value, 1.0);
            assert_eq!(ms_essim(&st, l, &p).unwrap().value, 0.0);
            assert_eq!(ssim(&st, l, &p).unwrap(), 1.0);
            assert_eq!(essim(&st, l, &p).unwrap(), 0.0);
        }
        let c = WaveletPyramid::decompose(&x.mapv(|_| 42.0), 2);
        let st = scale_stats(&c, &c, 2);
        for l in &st.levels {
            assert!(l.var_x.iter().all(|&v| v == 0.0));
            assert!(l.mu_x.iter().all(|&v| (v - 42.0).abs() < 1e-12));
        }
    }

    #[test]
    fn single_level_is_ssim() {
        let (_, _, px, py) = pair(16, 1);
        let p = FeatureParams::default();
        let st = scale_stats(&px, &py, 1);
        assert_eq!(ms_exponents(1), vec![1.0]);
        assert!((ms_ssim(&st, 1, &p).unwrap().value - ssim(&st, 1, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn anticorrelated_cs_below_one() {
        let x = random(8, 3);
        let px = WaveletPyramid::decompose(&x, 1);
        let py = WaveletPyramid::decompose(&x.mapv(|v| 255.0 - v), 1);
        let st = scale_stats(&px, &py, 1);
        let cs = cs_map(st.level(1), FeatureParams::default().k2);
        assert!(cs.iter().all(|&c| c < 1.0));
    }

    #[test]
    fn exponents_renormalized() {
        for l in 1..=5 {
            let a = ms_exponents(l);
            assert_eq!(a.len(), l);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
