use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use funque_cli::distort::Distortion;
use funque_cli::pipeline::{self, ExtractOptions, SynthSpec};
use funque_core::csf::{CsfConfig, CsfMethod};
use funque_core::features::id::all_feature_ids;
use funque_core::io::{load_manifest, BitDepth, Channel, YuvReader};
use funque_core::transform::TransformConfig;
use funque_core::{FeatureId, FeatureParams};
use funque_learn::cache::{cache_key, CacheMeta, CODE_VERSION};
use funque_learn::eval::cross_db_srocc;
use funque_learn::fusion::{train_matrix, ModelTransform};
use funque_learn::select::{bucket_features, buckets_for, cgfs};
use funque_learn::{FeatureTable, FusionModel, Preset, RegressorKind, TrainConfig};

/// Full-reference video quality from a shared CSF-weighted Haar transform.
#[derive(Parser)]
#[command(name = "funque", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract pooled features for every pair of a manifest into a CSV cache.
    Extract(ExtractArgs),
    /// Score one distorted video against its reference with a trained model.
    Score(ScoreArgs),
    /// Train a fusion model from a feature cache.
    Train(TrainArgs),
    /// Constrained greedy feature selection over several feature caches.
    Select(SelectArgs),
    /// Cross-database SROCC of a feature set.
    Eval(EvalArgs),
    /// Score a reference under increasing synthetic distortion.
    Mono(MonoArgs),
    /// Write a synthetic dataset (YUV files and manifest).
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct TransformArgs {
    /// Published model configuration; excludes the explicit transform flags.
    #[arg(long, conflicts_with_all = ["csf", "levels", "sast", "no_sast", "dh_ratio", "channels"])]
    preset: Option<Preset>,
    /// Contrast sensitivity method, or `none`.
    #[arg(long)]
    csf: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, conflicts_with = "no_sast")]
    sast: bool,
    #[arg(long)]
    no_sast: bool,
    /// Viewing distance in picture heights.
    #[arg(long)]
    dh_ratio: Option<f64>,
    /// `Y` or `YCbCr` (or a comma list of channels).
    #[arg(long)]
    channels: Option<String>,
}

impl TransformArgs {
    fn transform(&self) -> Result<TransformConfig> {
        if let Some(p) = self.preset {
            return Ok(p.transform());
        }
        let mut t = TransformConfig::default();
        if let Some(c) = &self.csf {
            t.csf = if c.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(c.parse::<CsfMethod>()?)
            };
        }
        if let Some(l) = self.levels {
            t.levels = l;
        }
        if self.sast {
            t.use_sast = true;
        }
        if self.no_sast {
            t.use_sast = false;
        }
        if let Some(d) = self.dh_ratio {
            t.dh_ratio = d;
        }
        t.validate()?;
        Ok(t)
    }

    fn channels(&self) -> Result<Vec<Channel>> {
        parse_channels(self.channels.as_deref().unwrap_or("Y"))
    }
}

#[derive(Args, Clone)]
struct Common {
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// CSF parameter file overriding the bundled values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn csf_config(&self) -> Result<CsfConfig> {
        match &self.config {
            Some(p) => Ok(CsfConfig::load(p)?),
            None => Ok(CsfConfig::bundled()),
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
    /// Comma-separated feature ids instead of every candidate feature.
    #[arg(long, conflicts_with = "preset")]
    features: Option<String>,
    /// Also write per-frame values to `<out>.frames.csv`.
    #[arg(long)]
    per_frame: bool,
    /// Recompute even if the cache is up to date.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VideoArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    bit_depth: u32,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "dis")]
    distorted: PathBuf,
    #[command(flatten)]
    video: VideoArgs,
    /// Print the per-frame feature table.
    #[arg(long)]
    per_frame: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct RegressorArgs {
    #[arg(long, default_value = "linear")]
    regressor: RegressorKind,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

impl RegressorArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            kind: self.regressor,
            c: self.c,
            epsilon: self.epsilon,
            gamma: self.gamma,
            ridge_lambda: self.lambda,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args)]
struct FeatureSetArgs {
    #[arg(long, conflicts_with = "ids")]
    preset: Option<Preset>,
    /// Comma-separated feature ids.
    #[arg(long)]
    ids: Option<String>,
}

impl FeatureSetArgs {
    fn ids(&self) -> Result<Vec<FeatureId>> {
        match (&self.preset, &self.ids) {
            (Some(p), _) => Ok(p.features()),
            (None, Some(s)) => parse_ids(s),
            (None, None) => bail!("give --preset or --ids"),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Feature cache CSV of the training database.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    set: FeatureSetArgs,
    #[command(flatten)]
    regressor: RegressorArgs,
}

#[derive(Args)]
struct SelectArgs {
    /// Feature cache CSVs, one per database.
    #[arg(long, num_args = 2.., required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    channels: Option<String>,
    /// Coarsest level of the buckets (defaults to the caches' level).
    #[arg(long)]
    levels: Option<usize>,
    #[command(flatten)]
    regressor: RegressorArgs,
    /// Write every candidate evaluation to this CSV.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, num_args = 2.., required = true)]
    features: Vec<PathBuf>,
    #[command(flatten)]
    set: FeatureSetArgs,
    #[command(flatten)]
    regressor: RegressorArgs,
    /// Write the train × test matrix to this CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct MonoArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[command(flatten)]
    video: VideoArgs,
    #[arg(long)]
    distortion: Distortion,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    severities: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 3)]
    clips: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_channels(s: &str) -> Result<Vec<Channel>> {
    if s.eq_ignore_ascii_case("ycbcr") {
        return Ok(Channel::ALL.to_vec());
    }
    let mut v = s
        .split(',')
        .map(|c| c.trim().parse::<Channel>().map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

fn parse_ids(s: &str) -> Result<Vec<FeatureId>> {
    s.split(',')
        .map(|p| Ok(FeatureId::parse_with_default(p.trim(), Channel::Y)?))
        .collect()
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}

fn load_tables(paths: &[PathBuf]) -> Result<Vec<FeatureTable>> {
    paths
        .iter()
        .map(|p| FeatureTable::read_csv(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn table_transform(path: &Path) -> Option<ModelTransform> {
    CacheMeta::read(path).ok().map(|m| m.transform)
}

fn reader(path: &Path, v: &VideoArgs) -> Result<YuvReader> {
    Ok(YuvReader::open(path, v.width, v.height, BitDepth::from_bits(v.bit_depth)?)?)
}

/// Exit status: 0 success, 1 partial failure.
fn extract(a: ExtractArgs) -> Result<u8> {
    let manifest = load_manifest(&a.manifest)?;
    let transform = a.transform.transform()?;
    let ids = match (a.transform.preset, &a.features) {
        (Some(p), _) => p.features(),
        (None, Some(s)) => parse_ids(s)?,
        (None, None) => all_feature_ids(&a.transform.channels()?, transform.levels),
    };
    let params = FeatureParams::default();
    let opts = ExtractOptions {
        transform,
        ids: ids.clone(),
        params,
        csf: a.common.csf_config()?,
    };

    let mut keyed = std::fs::read(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    if let Some(cfg) = &a.common.config {
        keyed.extend(std::fs::read(cfg).with_context(|| format!("reading {}", cfg.display()))?);
    }
    let sizes: Vec<u64> = manifest
        .rows
        .iter()
        .map(|r| (r.spec.frame_count * r.spec.frame_size()) as u64)
        .collect();
    let key = cache_key(&keyed, &sizes, &transform.into(), &params, &ids);
    if !a.force && a.out.exists() {
        if let Ok(meta) = CacheMeta::read(&a.out) {
            if meta.key == key && meta.failures.is_empty() {
                println!("{}: up to date", a.out.display());
                return Ok(0);
            }
        }
    }

    let outcome = with_jobs(a.common.jobs, || pipeline::extract_manifest(&manifest, &opts))??;
    outcome.table.write_csv(&a.out)?;
    CacheMeta {
        database: manifest.name.clone(),
        code_version: CODE_VERSION.to_string(),
        transform: transform.into(),
        key,
        failures: outcome.failures.clone(),
    }
    .write(&a.out)?;
    if a.per_frame {
        pipeline::write_per_frame(&a.out.with_extension("frames.csv"), &outcome.per_frame)?;
    }
    println!(
        "{}: {} videos, {} features",
        a.out.display(),
        outcome.table.rows.len(),
        outcome.table.ids.len()
    );
    for (video, err) in &outcome.failures {
        eprintln!("error: {video}: {err}");
    }
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

fn score(a: ScoreArgs) -> Result<u8> {
    let model = FusionModel::load(&a.model)?;
    let r = reader(&a.reference, &a.video)?;
    let d = reader(&a.distorted, &a.video)?;
    if r.spec() != d.spec() {
        bail!(
            "reference has {} frames, distorted has {}",
            r.spec().frame_count,
            d.spec().frame_count
        );
    }
    let csf = a.common.csf_config()?;
    let rep = with_jobs(a.common.jobs, || {
        pipeline::score(&model, &csf, FeatureParams::default(), &r, &d)
    })??;
    if a.per_frame {
        let pf = &rep.features.per_frame;
        let header: Vec<String> = pf.ids.iter().map(|i| i.to_string()).collect();
        println!("frame,{}", header.join(","));
        for (t, row) in pf.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.map_or_else(String::new, |v| format!("{v:.6}"))).collect();
            println!("{t},{}", cells.join(","));
        }
    }
    println!("score: {:.6}", rep.score);
    Ok(0)
}

fn train(a: TrainArgs) -> Result<u8> {
    let table = FeatureTable::read_csv(&a.features)?;
    let ids = a.set.ids()?;
    let meta_t = table_transform(&a.features);
    let transform: Option<ModelTransform> = match (a.set.preset, meta_t) {
        (Some(p), Some(t)) if ModelTransform::from(p.transform()) != t => {
            bail!("{} was not extracted with the {} transform", a.features.display(), p)
        }
        (Some(p), _) => Some(p.transform().into()),
        (None, t) => t,
    };
    let mut model = train_matrix(&ids, &table.columns(&ids)?, &table.mos, &a.regressor.config())?;
    model.transform = transform;
    if let Some(p) = a.set.preset {
        model = model.with_preset(p.name());
    }
    model.save(&a.out)?;
    let pred: Vec<f64> = table.columns(&ids)?.iter().map(|r| model.predict_row(r)).collect();
    let s = funque_learn::eval::srocc(&pred, &table.mos).map(|s| s.value).unwrap_or(f64::NAN);
    println!("{}: {} features, training SROCC {:.6}", a.out.display(), ids.len(), s);
    Ok(0)
}

fn select(a: SelectArgs) -> Result<u8> {
    let tables = load_tables(&a.features)?;
    let channels = parse_channels(a.channels.as_deref().unwrap_or("Y"))?;
    let levels = a
        .levels
        .or_else(|| table_transform(&a.features[0]).map(|t| t.levels))
        .unwrap_or(2);
    let buckets = buckets_for(&channels, levels);
    for id in bucket_features(&buckets) {
        for t in &tables {
            t.column_index(&id).with_context(|| format!("cache {}", t.name))?;
        }
    }
    let sel = with_jobs(a.jobs, || cgfs(&buckets, &tables, &a.regressor.config()))??;
    if let Some(path) = &a.audit {
        let mut text = String::from("pass,bucket,group,candidate,srocc,best\n");
        for e in &sel.audit {
            let set: Vec<String> = e.candidate.iter().map(|i| i.to_string()).collect();
            let val = match &e.outcome {
                Ok(v) => format!("{v:.6}"),
                Err(err) => format!("error: {}", err.replace(',', ";")),
            };
            text += &format!(
                "{},{},{},{},{},{}\n",
                e.pass,
                buckets[e.bucket].name,
                e.group,
                set.join(" "),
                val,
                e.became_best
            );
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("passes: {}", sel.passes);
    println!("evaluations: {}", sel.audit.len());
    for &(b, g) in &sel.chosen {
        let ids: Vec<String> = buckets[b].groups[g].iter().map(|i| i.to_string()).collect();
        println!("chosen: {} -> {}", buckets[b].name, ids.join(" + "));
    }
    let ids: Vec<String> = sel.features.iter().map(|i| i.to_string()).collect();
    println!("features: {}", ids.join(","));
    println!("cross-database SROCC: {:.6}", sel.srocc);
    Ok(0)
}

fn eval(a: EvalArgs) -> Result<u8> {
    let tables = load_tables(&a.features)?;
    let ids = a.set.ids()?;
    let res = with_jobs(a.jobs, || cross_db_srocc(&tables, &ids, &a.regressor.config()))??;
    print!("{}", res.to_table());
    if let Some(path) = &a.out {
        let mut text = String::from("train,test,srocc\n");
        for (i, j, v) in res.entries() {
            text += &format!("{},{},{v:.6}\n", res.databases[i], res.databases[j]);
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if res.is_complete() { 0 } else { 1 })
}

fn mono(a: MonoArgs) -> Result<u8> {
    let model = FusionModel::load(&a.model)?;
    let r = reader(&a.reference, &a.video)?;
    let csf = a.common.csf_config()?;
    let rep = with_jobs(a.common.jobs, || {
        pipeline::mono(&model, &csf, FeatureParams::default(), &r, a.distortion, &a.severities, a.seed)
    })??;
    println!("severity,score");
    for (s, v) in rep.severities.iter().zip(&rep.scores) {
        println!("{s},{v:.6}");
    }
    println!("monotone: {}", if rep.monotone { "PASS" } else { "FAIL" });
    Ok(0)
}

fn synth(a: SynthArgs) -> Result<u8> {
    if !a.width.is_multiple_of(2) || !a.height.is_multiple_of(2) || a.width == 0 || a.height == 0 {
        bail!("width and height must be even and positive");
    }
    let spec = SynthSpec {
        clips: a.clips,
        width: a.width,
        height: a.height,
        frames: a.frames,
        seed: a.seed,
    };
    let path = pipeline::write_synthetic_dataset(&a.out, &a.name, &spec)?;
    println!("{}", path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Score(a) => score(a),
        Command::Train(a) => train(a),
        Command::Select(a) => select(a),
        Command::Eval(a) => eval(a),
        Command::Mono(a) => mono(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
