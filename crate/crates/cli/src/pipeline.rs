//! End-to-end operations behind the subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use funque_core::csf::CsfConfig;
use funque_core::extract::PerFrame;
use funque_core::io::{encode_frame, BitDepth, DatasetManifest, YuvReader};
use funque_core::transform::TransformConfig;
use funque_core::{Extractor, FeatureId, FeatureParams, FrameSource, VideoFeatures};
use funque_learn::FeatureTable;
use funque_learn::FusionModel;
use rayon::prelude::*;

use crate::distort::{Distorted, Distortion};
use crate::synth::SynthClip;

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub transform: TransformConfig,
    pub ids: Vec<FeatureId>,
    pub params: FeatureParams,
    pub csf: CsfConfig,
}

impl ExtractOptions {
    pub fn extractor(&self) -> Result<Extractor> {
        Ok(Extractor::new(self.transform, &self.csf, self.params, &self.ids)?)
    }
}

#[derive(Debug)]
pub struct ExtractOutcome {
    pub table: FeatureTable,
    /// `(video, error)` for rows that could not be processed.
    pub failures: Vec<(String, String)>,
    /// Per-frame values of every successful row, in table order.
    pub per_frame: Vec<(String, PerFrame)>,
}

/// Extracts every manifest row; rows that fail are reported, not fatal.
/// Output order follows the manifest regardless of scheduling.
pub fn extract_manifest(manifest: &DatasetManifest, opts: &ExtractOptions) -> Result<ExtractOutcome> {
    let ex = opts.extractor()?;
    let results: Vec<_> = manifest
        .rows
        .par_iter()
        .map(|row| -> funque_core::Result<VideoFeatures> {
            let s = &row.spec;
            let r = YuvReader::open(&row.ref_path, s.width, s.height, s.bit_depth)?;
            let d = YuvReader::open(&row.dis_path, s.width, s.height, s.bit_depth)?;
            ex.extract(&r, &d)
        })
        .collect();

    let ids = ex.ids().to_vec();
    let (mut videos, mut rows, mut mos, mut failures, mut per_frame) = (vec![], vec![], vec![], vec![], vec![]);
    for (row, res) in manifest.rows.iter().zip(results) {
        let name = row.dis_path.display().to_string();
        match res {
            Ok(vf) => {
                rows.push(ids.iter().map(|id| vf.pooled.get(id).expect("extracted")).collect());
                mos.push(row.mos);
                videos.push(name.clone());
                per_frame.push((name, vf.per_frame));
            }
            Err(e) => failures.push((name, e.to_string())),
        }
    }
    Ok(ExtractOutcome {
        table: FeatureTable::with_videos(&manifest.name, ids, videos, rows, mos)?,
        failures,
        per_frame,
    })
}

pub fn write_per_frame(path: &Path, per_frame: &[(String, PerFrame)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    if let Some((_, first)) = per_frame.first() {
        let header: Vec<String> = first.ids.iter().map(|i| i.to_string()).collect();
        writeln!(w, "video,frame,{}", header.join(","))?;
    }
    for (video, pf) in per_frame {
        for (t, row) in pf.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.map_or_else(String::new, |v| format!("{v:.6}"))).collect();
            writeln!(w, "{video},{t},{}", cells.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Transform a model was trained with; models without one are rejected.
pub fn model_transform(model: &FusionModel) -> Result<TransformConfig> {
    match model.transform {
        Some(t) => Ok(t.into()),
        None => bail!("model file does not record its transform settings"),
    }
}

#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub score: f64,
    pub features: VideoFeatures,
}

pub fn score(
    model: &FusionModel,
    csf: &CsfConfig,
    params: FeatureParams,
    reference: &dyn FrameSource,
    distorted: &dyn FrameSource,
) -> Result<ScoreReport> {
    let ex = Extractor::new(model_transform(model)?, csf, params, &model.feature_ids)?;
    let features = ex.extract(reference, distorted)?;
    Ok(ScoreReport {
        score: model.predict(&features.pooled)?,
        features,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonoReport {
    pub distortion: Distortion,
    pub severities: Vec<f64>,
    pub scores: Vec<f64>,
    /// Scores never increase as severity grows.
    pub monotone: bool,
}

pub fn mono(
    model: &FusionModel,
    csf: &CsfConfig,
    params: FeatureParams,
    reference: &dyn FrameSource,
    distortion: Distortion,
    severities: &[f64],
    seed: u64,
) -> Result<MonoReport> {
    if severities.is_empty() {
        bail!("no severities given");
    }
    if severities.windows(2).any(|w| w[1] <= w[0]) || severities.iter().any(|s| s.is_nan() || *s < 0.0) {
        bail!("severities must be non-negative and strictly increasing");
    }
    let ex = Extractor::new(model_transform(model)?, csf, params, &model.feature_ids)?;
    let scores = severities
        .par_iter()
        .map(|&severity| -> Result<f64> {
            let dis = Distorted {
                source: reference,
                distortion,
                severity,
                seed,
            };
            Ok(model.predict(&ex.extract(reference, &dis)?.pooled)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = scores.windows(2).all(|w| w[1] <= w[0]);
    Ok(MonoReport {
        distortion,
        severities: severities.to_vec(),
        scores,
        monotone,
    })
}

/// Luma PSNR of two sources over all frames (capped at 100 dB).
pub fn psnr(reference: &dyn FrameSource, distorted: &dyn FrameSource) -> Result<f64> {
    let (mut se, mut n) = (0.0, 0usize);
    for t in 0..reference.frame_count() {
        let (r, d) = (reference.frame(t)?, distorted.frame(t)?);
        se += r.y.iter().zip(d.y.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        n += r.y.len();
    }
    let mse = se / n as f64;
    Ok(if mse == 0.0 { 100.0 } else { (10.0 * (255.0f64.powi(2) / mse).log10()).min(100.0) })
}

/// Synthetic opinion score in (0, 100) from luma PSNR.
pub fn synthetic_mos(psnr_db: f64) -> f64 {
    100.0 / (1.0 + (-(psnr_db - 30.0) / 4.0).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub clips: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
}

/// Reference clips, each paired with every distortion at its five default
/// severities.
pub fn synthetic_pairs(spec: &SynthSpec) -> Vec<(SynthClip, Distortion, f64, u64)> {
    let mut out = Vec::new();
    for c in 0..spec.clips {
        let clip_seed = spec.seed.wrapping_mul(1000).wrapping_add(c as u64);
        let clip = SynthClip::new(spec.width, spec.height, spec.frames, clip_seed);
        for d in Distortion::ALL {
            for s in d.default_severities() {
                out.push((clip.clone(), d, s, clip_seed ^ 0xD15));
            }
        }
    }
    out
}

fn write_yuv(path: &Path, source: &dyn FrameSource) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for t in 0..source.frame_count() {
        w.write_all(&encode_frame(&source.frame(t)?, BitDepth::Eight))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes 8-bit YUV files and a manifest `<name>.csv` into `dir`.
pub fn write_synthetic_dataset(dir: &Path, name: &str, spec: &SynthSpec) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let pairs = synthetic_pairs(spec);
    let per_clip = pairs.len() / spec.clips.max(1);
    let mut manifest = String::from("ref_path,dis_path,width,height,bit_depth,mos\n");
    for (k, (clip, d, s, seed)) in pairs.iter().enumerate() {
        let c = k / per_clip;
        let ref_name = format!("{name}_ref{c}.yuv");
        if k % per_clip == 0 {
            write_yuv(&dir.join(&ref_name), clip)?;
        }
        let dis = Distorted {
            source: clip,
            distortion: *d,
            severity: *s,
            seed: *seed,
        };
        let dis_name = format!("{name}_dis{c}_{d}_{s}.yuv");
        write_yuv(&dir.join(&dis_name), &dis)?;
        let mos = synthetic_mos(psnr(clip, &dis)?);
        manifest += &format!("{ref_name},{dis_name},{},{},8,{mos:.6}\n", spec.width, spec.height);
    }
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, manifest).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
