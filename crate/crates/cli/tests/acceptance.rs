//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use funque_cli::distort::{Distorted, Distortion};
use funque_cli::pipeline::{mono, psnr, synthetic_mos, synthetic_pairs, SynthSpec};
use funque_cli::synth::SynthClip;
use funque_core::baseline::gaussian_ssim_video;
use funque_core::csf::{
    build_channel_csf, larson_csf, nadenau_spatial_filter, ngan_spatial_filter, ChannelCsf, CsfConfig, CsfMethod,
    Subband,
};
use funque_core::features::all_feature_ids;
use funque_core::features::ssim::{essim, scale_stats, ssim};
use funque_core::io::{Channel, FramePlanes};
use funque_core::stats::local_stats;
use funque_core::transform::{sast_factor, TransformConfig, UnifiedTransform, WaveletPyramid};
use funque_core::{Extractor, FeatureId, FeatureKind, FeatureParams, FrameSource};
use funque_learn::eval::{fisher_mean, srocc};
use funque_learn::fusion::{train, train_matrix};
use funque_learn::select::{cefs, cgfs, FeatureBucket};
use funque_learn::{FeatureTable, FusionModel, Preset, TrainConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn random_plane(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..255.0))
}

/// A distorted copy: gain, offset and additive noise.
fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Array2<f64>) {
    let x = random_plane(n, n, rng);
    let gain = rng.random_range(0.5..1.0);
    let noise = rng.random_range(1.0..40.0);
    let y = x.mapv(|v| gain * v + 10.0 + rng.random_range(-noise..noise));
    (x, y)
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

// Straight-line Haar over 2×2 blocks [a b; c d].
fn naive_haar(x: &Array2<f64>) -> [Array2<f64>; 4] {
    let (h, w) = (x.nrows() / 2, x.ncols() / 2);
    let mut out = [(); 4].map(|_| Array2::zeros((h, w)));
    for i in 0..h {
        for j in 0..w {
            let a = x[[2 * i, 2 * j]];
            let b = x[[2 * i, 2 * j + 1]];
            let c = x[[2 * i + 1, 2 * j]];
            let d = x[[2 * i + 1, 2 * j + 1]];
            out[0][[i, j]] = (a + b + c + d) / 2.0;
            out[1][[i, j]] = (a - b + c - d) / 2.0;
            out[2][[i, j]] = (a + b - c - d) / 2.0;
            out[3][[i, j]] = (a - b - c + d) / 2.0;
        }
    }
    out
}

fn naive_block_mean(x: &Array2<f64>, f: usize) -> Array2<f64> {
    let (h, w) = (x.nrows() / f, x.ncols() / f);
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut s = 0.0;
        for r in 0..f {
            for c in 0..f {
                s += x[[i * f + r, j * f + c]];
            }
        }
        s / (f * f) as f64
    })
}

const SUBBANDS: [Subband; 4] = [Subband::A, Subband::H, Subband::V, Subband::D];

fn transform_oracle() -> Outcome {
    let start = Instant::now();
    let csf = CsfConfig::bundled();
    let levels = 3;
    let methods = [CsfMethod::LiSW, CsfMethod::NadenauSW, CsfMethod::LarsonSW, CsfMethod::WatsonSW];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_energy) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let frame = random_plane(64, 64, &mut rng);

        let bands = naive_haar(&frame);
        let e_in: f64 = frame.iter().map(|v| v * v).sum();
        let e_out: f64 = bands.iter().flat_map(|b| b.iter()).map(|v| v * v).sum();
        worst_energy = worst_energy.max((e_in - e_out).abs() / e_in);

        for method in methods {
            for ch in Channel::ALL {
                for use_sast in [false, true] {
                    let cfg = TransformConfig {
                        levels,
                        csf: Some(method),
                        use_sast,
                        dh_ratio: 3.0,
                    };
                    let t = UnifiedTransform::new(cfg, &csf, &[ch]).map_err(|e| e.to_string())?;
                    let got = t.apply(&frame, ch).map_err(|e| e.to_string())?;
                    let ChannelCsf::Weights(w) = build_channel_csf(method, ch, levels, 3.0, &csf).map_err(|e| e.to_string())?
                    else {
                        return Err(format!("{method} is not a subband-weight method"));
                    };
                    let mut a = if use_sast { naive_block_mean(&frame, 2) } else { frame.clone() };
                    for l in 1..=levels {
                        let b = naive_haar(&a);
                        for (k, sb) in SUBBANDS.into_iter().enumerate() {
                            let expect = b[k].mapv(|v| v * w.get(l, sb));
                            worst = worst.max(max_abs_diff(got.band(l, sb), &expect));
                        }
                        a = b[0].clone();
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max abs diff {worst:e}"))?;
    ensure(worst_energy <= 1e-9, || format!("energy rel err {worst_energy:e}"))?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("max abs diff {worst:.1e}, energy rel err {worst_energy:.1e}, {elapsed:.2?}"))
}

/// Population mean, variances and covariance over disjoint b×b blocks.
struct BlockStats {
    mu_x: Array2<f64>,
    mu_y: Array2<f64>,
    var_x: Array2<f64>,
    var_y: Array2<f64>,
    cov: Array2<f64>,
}

fn block_stats(x: &Array2<f64>, y: &Array2<f64>, b: usize) -> BlockStats {
    let (h, w) = (x.nrows() / b, x.ncols() / b);
    let n = (b * b) as f64;
    let mut s = BlockStats {
        mu_x: Array2::zeros((h, w)),
        mu_y: Array2::zeros((h, w)),
        var_x: Array2::zeros((h, w)),
        var_y: Array2::zeros((h, w)),
        cov: Array2::zeros((h, w)),
    };
    for i in 0..h {
        for j in 0..w {
            let cells = || (0..b).flat_map(move |r| (0..b).map(move |c| (i * b + r, j * b + c)));
            let mx = cells().map(|p| x[p]).sum::<f64>() / n;
            let my = cells().map(|p| y[p]).sum::<f64>() / n;
            s.mu_x[[i, j]] = mx;
            s.mu_y[[i, j]] = my;
            s.var_x[[i, j]] = cells().map(|p| (x[p] - mx).powi(2)).sum::<f64>() / n;
            s.var_y[[i, j]] = cells().map(|p| (y[p] - my).powi(2)).sum::<f64>() / n;
            s.cov[[i, j]] = cells().map(|p| (x[p] - mx) * (y[p] - my)).sum::<f64>() / n;
        }
    }
    s
}

fn max_rel_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs() / q.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn recursion_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (x, y) = random_pair(128, &mut rng);
        for levels in 1..=3 {
            let px = WaveletPyramid::decompose(&x, levels);
            let py = WaveletPyramid::decompose(&y, levels);
            let st = scale_stats(&px, &py, levels);
            for l in 1..=levels {
                let o = block_stats(&x, &y, 1 << l);
                let s = st.level(l);
                for (got, want) in [
                    (&s.mu_x, &o.mu_x),
                    (&s.mu_y, &o.mu_y),
                    (&s.var_x, &o.var_x),
                    (&s.var_y, &o.var_y),
                    (&s.cov_xy, &o.cov),
                ] {
                    worst = worst.max(max_rel_diff(got, want));
                }
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max rel diff {worst:e}"))?;
    Ok(format!("max rel diff {worst:.1e}"))
}

fn spatial_ssim_oracle() -> Outcome {
    let p = FeatureParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x, y) = random_pair(128, &mut rng);
        let levels = 3;
        let st = scale_stats(
            &WaveletPyramid::decompose(&x, levels),
            &WaveletPyramid::decompose(&y, levels),
            levels,
        );
        for l in 1..=levels {
            let o = block_stats(&x, &y, 1 << l);
            let mut map = Vec::new();
            for idx in 0..o.mu_x.len() {
                let (i, j) = (idx / o.mu_x.ncols(), idx % o.mu_x.ncols());
                let (mx, my) = (o.mu_x[[i, j]], o.mu_y[[i, j]]);
                let lum = (2.0 * mx * my + p.k1) / (mx * mx + my * my + p.k1);
                let cs = (2.0 * o.cov[[i, j]] + p.k2) / (o.var_x[[i, j]] + o.var_y[[i, j]] + p.k2);
                map.push(lum * cs);
            }
            let mean = map.iter().sum::<f64>() / map.len() as f64;
            let sd = (map.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / map.len() as f64).sqrt();
            let got_ssim = ssim(&st, l, &p).map_err(|e| e.to_string())?;
            let got_essim = essim(&st, l, &p).map_err(|e| e.to_string())?;
            worst = worst.max((got_ssim - mean).abs()).max((got_essim - sd / mean).abs());
        }
    }
    ensure(worst <= 1e-5, || format!("max abs diff {worst:e}"))?;
    Ok(format!("max abs diff {worst:.1e} (SSIM and ESSIM, L=1..3)"))
}

fn integral_image_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x, y) = random_pair(64, &mut rng);
        for k in [3, 9] {
            let got = local_stats(&x, &y, k, 1);
            let n = 64 - k + 1;
            let kk = (k * k) as f64;
            for i in 0..n {
                for j in 0..n {
                    let cells = || (0..k).flat_map(move |r| (0..k).map(move |c| (i + r, j + c)));
                    let mx = cells().map(|q| x[q]).sum::<f64>() / kk;
                    let my = cells().map(|q| y[q]).sum::<f64>() / kk;
                    let vx = cells().map(|q| (x[q] - mx).powi(2)).sum::<f64>() / kk;
                    let vy = cells().map(|q| (y[q] - my).powi(2)).sum::<f64>() / kk;
                    let c = cells().map(|q| (x[q] - mx) * (y[q] - my)).sum::<f64>() / kk;
                    for (g, w) in [
                        (got.mu_x[[i, j]], mx),
                        (got.mu_y[[i, j]], my),
                        (got.var_x[[i, j]], vx),
                        (got.var_y[[i, j]], vy),
                        (got.cov_xy[[i, j]], c),
                    ] {
                        worst = worst.max((g - w).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max abs diff {worst:e}"))?;
    Ok(format!("max abs diff {worst:.1e}"))
}

fn identity_suite() -> Outcome {
    use FeatureKind::*;
    let clip = SynthClip::new(128, 128, 8, 5);
    let frames = clip.to_frames();
    let csf = CsfConfig::bundled();
    let expected = |k: FeatureKind| -> Option<f64> {
        match k {
            Ssim | MsSsim | DlmS | VifA | VifHv => Some(1.0),
            Essim | MsEssim | SrredA | SrredHv | TrredA | TrredHv | StrredA | StrredHv | Mad | Blur | Edge
            | DeltaTlSai | DeltaTlBlur => Some(0.0),
            // Temporal activity of one video, not a comparison.
            MadRef | MadDis => None,
        }
    };
    let configs = [
        Preset::YFunquePlus.transform(),
        Preset::FsThreeCFunquePlus.transform(),
        TransformConfig {
            levels: 3,
            csf: Some(CsfMethod::NganSpat),
            use_sast: false,
            dh_ratio: 3.0,
        },
    ];
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for cfg in configs {
        let ids = all_feature_ids(&Channel::ALL, cfg.levels);
        let ex = Extractor::new(cfg, &csf, FeatureParams::default(), &ids).map_err(|e| e.to_string())?;
        let vf = ex.extract(&frames, &frames).map_err(|e| e.to_string())?;
        for id in &ids {
            let Some(want) = expected(id.kind) else { continue };
            let got = vf.pooled.get(id).ok_or_else(|| format!("{id} missing"))?;
            let err = (got - want).abs();
            ensure(err <= 1e-9, || format!("{id} = {got} under {:?}, expected {want}", cfg.csf))?;
            worst = worst.max(err);
            checked += 1;
        }
    }
    Ok(format!("{checked} feature values, max deviation {worst:.1e}"))
}

/// Table entries rewritten into canonical ids: `X_n` becomes `X@n` and a
/// leading Δ becomes the `d` prefix of the name after the channel.
fn table_to_ids(row: &str) -> Vec<String> {
    row.split(" + ")
        .map(|t| {
            let t = t.replacen('_', "@", 1);
            match t.strip_prefix('Δ') {
                Some(rest) => match rest.split_once('-') {
                    Some((ch @ ("Y" | "Cb" | "Cr"), tail)) => format!("{ch}-d{tail}"),
                    _ => format!("d{rest}"),
                },
                None => t,
            }
        })
        .collect()
}

fn published_constants() -> Outcome {
    ensure(sast_factor(3.0) == 2, || format!("sast_factor(3.0) = {}", sast_factor(3.0)))?;
    let ngan = ngan_spatial_filter(3.0).len();
    ensure(ngan == 21, || format!("NganSpat has {ngan} taps"))?;
    let csf = CsfConfig::bundled();
    for (ch, taps) in [(Channel::Y, 5), (Channel::Cr, 5), (Channel::Cb, 7)] {
        let n = nadenau_spatial_filter(csf.nadenau(ch).map_err(|e| e.to_string())?, 3.0).len();
        ensure(n == taps, || format!("NadenauSpat {ch} has {n} taps, expected {taps}"))?;
    }
    for f in [0.0, 0.5, 1.0, 2.0, 3.0, 3.999] {
        for phi in [0.0, 0.3, std::f64::consts::FRAC_PI_4] {
            ensure(larson_csf(f, phi) == 0.981, || format!("LarsonCSF({f}, {phi}) = {}", larson_csf(f, phi)))?;
        }
    }
    let table = [
        (Preset::YFunquePlus, "MS-ESSIM_2 + MAD-Ref_2 + DLM-S_2", CsfMethod::NadenauSW, true),
        (
            Preset::ThreeCFunquePlus,
            "Y-MS-ESSIM_2 + Y-MAD-Dis_2 + Y-DLM-S_2 + Y-SRRED-HV_2 + Y-TRRED-HV_2 + Cb-Edge_2 + Cr-MAD_2",
            CsfMethod::LiSW,
            true,
        ),
        (
            Preset::FsYFunquePlus,
            "MS-ESSIM_2 + ΔTL-SAI_2 + MAD-Dis_2 + DLM-S_2 + STRRED-HV_2",
            CsfMethod::NadenauSpat,
            false,
        ),
        (
            Preset::FsThreeCFunquePlus,
            "Y-MS-ESSIM_3 + ΔY-TL-SAI_3 + Y-DLM-S_3 + Cb-MAD-Dis_3 + Cb-SRRED-HV_3 + Cb-TRRED-HV_3 + Cb-Edge_3 + Cr-MAD_3 + Cr-Blur_3",
            CsfMethod::WatsonSW,
            false,
        ),
    ];
    for (preset, row, method, sast) in table {
        let want = table_to_ids(row);
        let got: Vec<String> = preset.feature_names().iter().map(|s| s.to_string()).collect();
        ensure(got == want, || format!("{preset}: {got:?} != {want:?}"))?;
        ensure(preset.csf() == method && preset.uses_sast() == sast, || {
            format!("{preset}: csf/sast mismatch")
        })?;
        // Every listed name parses to a feature the extractor understands.
        let ids = preset.features();
        Extractor::new(preset.transform(), &csf, FeatureParams::default(), &ids).map_err(|e| e.to_string())?;
    }
    Ok("SAST 2, Ngan 21 taps, Nadenau 5/5/7, Larson 0.981, four presets".into())
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let csf = CsfConfig::bundled();
    let params = FeatureParams::default();
    let preset = Preset::YFunquePlus;
    let vif = FeatureId::new(Channel::Y, FeatureKind::VifA, 2);
    let srred = FeatureId::new(Channel::Y, FeatureKind::SrredHv, 2);
    let msessim = FeatureId::new(Channel::Y, FeatureKind::MsEssim, 2);
    let ex = Extractor::new(preset.transform(), &csf, params, &[vif, srred, msessim]).map_err(|e| e.to_string())?;

    let clips: Vec<SynthClip> = (0..3).map(|k| SynthClip::new(192, 192, 6, 900 + k)).collect();
    for (c, clip) in clips.iter().enumerate() {
        for d in Distortion::ALL {
            let mut series: [Vec<f64>; 3] = Default::default();
            for s in d.default_severities() {
                let dis = Distorted {
                    source: clip,
                    distortion: d,
                    severity: s,
                    seed: 77 + c as u64,
                };
                let vf = ex.extract(clip, &dis).map_err(|e| e.to_string())?;
                for (k, id) in [vif, srred, msessim].iter().enumerate() {
                    series[k].push(vf.pooled.get(id).expect("requested"));
                }
            }
            ensure(strictly(&series[0], false), || format!("clip {c} {d}: VIF-A {:?}", series[0]))?;
            ensure(strictly(&series[1], true), || format!("clip {c} {d}: SRRED-HV {:?}", series[1]))?;
            ensure(strictly(&series[2], true), || format!("clip {c} {d}: MS-ESSIM {:?}", series[2]))?;
        }
    }

    // Train the preset's fusion on synthetic pairs from other clips.
    let spec = SynthSpec {
        clips: 4,
        width: 192,
        height: 192,
        frames: 6,
        seed: 31,
    };
    let ids = preset.features();
    let train_ex = Extractor::new(preset.transform(), &csf, params, &ids).map_err(|e| e.to_string())?;
    let (mut samples, mut mos) = (Vec::new(), Vec::new());
    for (clip, d, s, seed) in synthetic_pairs(&spec) {
        let dis = Distorted {
            source: &clip,
            distortion: d,
            severity: s,
            seed,
        };
        samples.push(train_ex.extract(&clip, &dis).map_err(|e| e.to_string())?.pooled);
        mos.push(synthetic_mos(psnr(&clip, &dis).map_err(|e| e.to_string())?));
    }
    let model = train(&samples, &mos, &TrainConfig::linear())
        .map_err(|e| e.to_string())?
        .with_preset(preset.name())
        .with_transform(preset.transform());
    for (c, clip) in clips.iter().enumerate() {
        for d in Distortion::ALL {
            let r = mono(&model, &csf, params, clip, d, &d.default_severities(), 5 + c as u64)
                .map_err(|e| e.to_string())?;
            ensure(r.monotone, || format!("mono clip {c} {d}: {:?}", r.scores))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!("3 clips x 3 distortions x 5 severities, mono monotone, {elapsed:.2?}"))
}

fn selection_fixture() -> (Vec<FeatureBucket>, Vec<FeatureTable>) {
    use FeatureKind::*;
    let id = |k| FeatureId::new(Channel::Y, k, 1);
    let buckets = vec![
        FeatureBucket::new("A", vec![vec![id(Ssim)], vec![id(Essim)]]),
        FeatureBucket::new("B", vec![vec![id(VifA)], vec![id(VifHv), id(SrredA)]]),
        FeatureBucket::new("C", vec![vec![id(DlmS), id(Blur)], vec![id(Mad)]]),
    ];
    let cols = [Ssim, Essim, VifA, VifHv, SrredA, DlmS, Blur, Mad].map(id).to_vec();
    let dbs = (0..3)
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + d);
            let (scale, offset) = (1.0 + d as f64, 10.0 * d as f64);
            let (mut rows, mut mos) = (Vec::new(), Vec::new());
            for _ in 0..60 {
                let q: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                let mut n = || rng.random_range(-0.02..0.02);
                let row = vec![
                    q[0] + n(),
                    n() * 50.0,
                    n() * 50.0,
                    q[1] + n(),
                    n() * 50.0,
                    n() * 50.0,
                    q[2] + n(),
                    n() * 50.0 - 0.1 * q[2],
                ];
                mos.push(scale * (q[0] + 0.6 * q[1] + 0.35 * q[2] + n()) + offset);
                rows.push(row);
            }
            FeatureTable::new(format!("db{d}"), cols.clone(), rows, mos).expect("consistent fixture")
        })
        .collect();
    (buckets, dbs)
}

fn cgfs_correctness() -> Outcome {
    let (buckets, dbs) = selection_fixture();
    let cfg = TrainConfig::linear();
    let start = Instant::now();
    let g = cgfs(&buckets, &dbs, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let e = cefs(&buckets, &dbs, &cfg).map_err(|e| e.to_string())?;
    let used: BTreeSet<usize> = g.chosen.iter().map(|&(b, _)| b).collect();
    ensure(used.len() == g.chosen.len(), || format!("bucket reused: {:?}", g.chosen))?;
    ensure(g.passes <= 3, || format!("{} passes", g.passes))?;
    let set = |v: &[FeatureId]| v.iter().copied().collect::<BTreeSet<_>>();
    ensure(set(&g.features) == set(&e.features), || {
        format!("CGFS {:?} != CEFS {:?}", g.features, e.features)
    })?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "chosen {:?} in {} passes, SROCC {:.4} = CEFS, {elapsed:.2?}",
        g.chosen, g.passes, g.srocc
    ))
}

fn fusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ids = [FeatureKind::VifA, FeatureKind::DlmS, FeatureKind::MsEssim].map(|k| FeatureId::new(Channel::Y, k, 2));
    let x: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let clean: Vec<f64> = x
        .iter()
        .map(|r| {
            let f = 1.5 * r[0] + r[1] - 0.8 * r[2];
            100.0 / (1.0 + (-3.0 * (f - 0.85)).exp())
        })
        .collect();
    let range = clean.iter().cloned().fold(f64::MIN, f64::max) - clean.iter().cloned().fold(f64::MAX, f64::min);
    let normal = rand_distr::Normal::new(0.0, 0.05 * range).expect("valid sigma");
    let mos: Vec<f64> = clean.iter().map(|c| c + rand_distr::Distribution::sample(&normal, &mut rng)).collect();
    let (train_x, test_x) = x.split_at(70);
    let (train_y, test_y) = mos.split_at(70);

    let mut report = Vec::new();
    for (name, cfg) in [("linear", TrainConfig::linear()), ("svr", TrainConfig::svr())] {
        let model = train_matrix(&ids, train_x, train_y, &cfg).map_err(|e| e.to_string())?;
        let pred: Vec<f64> = test_x.iter().map(|r| model.predict_row(r)).collect();
        let s = srocc(&pred, test_y).map_err(|e| e.to_string())?.value;
        ensure(s >= 0.95, || format!("{name} held-out SROCC {s:.4}"))?;

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("model.json");
        model.save(&path).map_err(|e| e.to_string())?;
        let loaded = FusionModel::load(&path).map_err(|e| e.to_string())?;
        ensure(loaded == model, || format!("{name}: loaded model differs"))?;
        ensure(loaded.to_json() == model.to_json(), || format!("{name}: JSON differs after reload"))?;
        let bits_equal = test_x
            .iter()
            .all(|r| loaded.predict_row(r).to_bits() == model.predict_row(r).to_bits());
        ensure(bits_equal, || format!("{name}: predictions differ after reload"))?;
        report.push(format!("{name} SROCC {s:.4}"));
    }
    Ok(format!("{}, round trip bit-stable", report.join(", ")))
}

fn fisher() -> Outcome {
    let v = fisher_mean(&[0.2, 0.8]).map_err(|e| e.to_string())?;
    let oracle = ((0.2f64.atanh() + 0.8f64.atanh()) / 2.0).tanh();
    ensure((v - 0.5722).abs() <= 1e-4, || format!("fisher_mean([0.2, 0.8]) = {v}"))?;
    ensure((v - oracle).abs() <= 1e-15, || format!("{v} vs oracle {oracle}"))?;
    for r in [-0.9, -0.3, 0.0, 0.1, 0.5, 0.8660, 0.99, 1.0] {
        for n in [1, 2, 5] {
            let m = fisher_mean(&vec![r; n]).map_err(|e| e.to_string())?;
            ensure(m == r, || format!("fisher_mean([{r}; {n}]) = {m}"))?;
        }
    }
    Ok(format!("fisher_mean([0.2, 0.8]) = {v:.6}, idempotent"))
}

/// `len` frames that cycle through a few pre-rendered ones, so the timing
/// measures computation rather than frame synthesis.
struct Cycled {
    frames: Vec<FramePlanes>,
    len: usize,
}

impl FrameSource for Cycled {
    fn frame_count(&self) -> usize {
        self.len
    }

    fn dims(&self) -> (usize, usize) {
        (self.frames[0].width(), self.frames[0].height())
    }

    fn frame(&self, index: usize) -> funque_core::Result<FramePlanes> {
        Ok(self.frames[index % self.frames.len()].clone())
    }
}

fn performance() -> Outcome {
    let (w, h, n) = (1920, 1080, 150);
    let clip = SynthClip::new(w, h, 4, 11);
    let reference = Cycled {
        frames: clip.to_frames(),
        len: n,
    };
    let distorted = Cycled {
        frames: reference
            .frames
            .iter()
            .enumerate()
            .map(|(t, f)| Distortion::GaussianNoise.apply(f, 6.0, t as u64))
            .collect(),
        len: n,
    };
    let preset = Preset::YFunquePlus;
    let ex = Extractor::new(preset.transform(), &CsfConfig::bundled(), FeatureParams::default(), &preset.features())
        .map_err(|e| e.to_string())?;
    // Single-threaded for both, so the comparison is about work done.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let (t_funque, t_ssim) = pool.install(|| -> Result<_, String> {
        let start = Instant::now();
        let vf = ex.extract(&reference, &distorted).map_err(|e| e.to_string())?;
        let t_funque = start.elapsed();
        ensure(vf.pooled.len() == 3, || "missing features".into())?;
        let start = Instant::now();
        let s = gaussian_ssim_video(&reference, &distorted).map_err(|e| e.to_string())?;
        let t_ssim = start.elapsed();
        ensure(s > 0.0 && s < 1.0, || format!("baseline SSIM {s}"))?;
        Ok((t_funque, t_ssim))
    })?;
    let ratio = t_ssim.as_secs_f64() / t_funque.as_secs_f64();
    ensure(ratio > 2.0, || format!("Y-FUNQUE+ {t_funque:.2?} vs SSIM {t_ssim:.2?} (x{ratio:.2})"))?;
    Ok(format!("Y-FUNQUE+ {t_funque:.2?} vs 9x9 Gaussian SSIM {t_ssim:.2?} (x{ratio:.1} faster)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("transform oracle", transform_oracle),
        ("multi-scale recursion equals block sums", recursion_equivalence),
        ("spatial SSIM oracle", spatial_ssim_oracle),
        ("integral-image local statistics", integral_image_oracle),
        ("identity suite", identity_suite),
        ("published constants and presets", published_constants),
        ("monotonicity", monotonicity),
        ("CGFS matches exhaustive search", cgfs_correctness),
        ("fusion regressors", fusion),
        ("Fisher mean", fisher),
        ("performance against Gaussian SSIM", performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
