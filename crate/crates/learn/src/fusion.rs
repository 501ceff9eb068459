//! Regressors that map pooled feature vectors to quality scores, and their
//! on-disk model format.

use std::path::Path;

use funque_core::csf::CsfMethod;
use funque_core::transform::TransformConfig;
use funque_core::{FeatureId, FeatureVector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num;

pub const MODEL_VERSION: u32 = 1;

/// Curvature floor used when a pair of samples has a degenerate kernel.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Linear,
    Svr,
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(RegressorKind::Linear),
            "svr" => Ok(RegressorKind::Svr),
            _ => Err(Error::Invalid(format!("unknown regressor `{s}` (expected linear or svr)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub kind: RegressorKind,
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means `1 / feature count`.
    pub gamma: Option<f64>,
    pub ridge_lambda: f64,
    /// KKT gap at which the SVR solver stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: RegressorKind::Linear,
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            ridge_lambda: 0.0,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

impl TrainConfig {
    pub fn linear() -> Self {
        TrainConfig::default()
    }

    pub fn svr() -> Self {
        TrainConfig {
            kind: RegressorKind::Svr,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(serialize_with = "num::vec")]
    pub mean: Vec<f64>,
    #[serde(serialize_with = "num::vec")]
    pub std: Vec<f64>,
}

impl Normalization {
    fn fit(ids: &[FeatureId], x: &[Vec<f64>]) -> Result<Self> {
        let n = x.len() as f64;
        let p = ids.len();
        let mut mean = vec![0.0; p];
        let mut std = vec![0.0; p];
        for j in 0..p {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            let s = v.sqrt();
            if s.is_nan() || s <= 1e-12 * m.abs().max(1.0) {
                return Err(Error::ZeroVariance(ids[j]));
            }
            mean[j] = m;
            std[j] = s;
        }
        Ok(Normalization { mean, std })
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regressor {
    Linear {
        #[serde(serialize_with = "num::vec")]
        weights: Vec<f64>,
        #[serde(serialize_with = "num::f64")]
        bias: f64,
        #[serde(serialize_with = "num::f64")]
        ridge_lambda: f64,
    },
    Svr {
        #[serde(serialize_with = "num::f64")]
        gamma: f64,
        #[serde(serialize_with = "num::f64")]
        c: f64,
        #[serde(serialize_with = "num::f64")]
        epsilon: f64,
        #[serde(serialize_with = "num::f64")]
        bias: f64,
        #[serde(serialize_with = "num::matrix")]
        support_vectors: Vec<Vec<f64>>,
        #[serde(serialize_with = "num::vec")]
        dual_coef: Vec<f64>,
    },
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

impl Regressor {
    /// Output in the normalized target scale.
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Regressor::Linear { weights, bias, .. } => bias + weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>(),
            Regressor::Svr {
                gamma,
                bias,
                support_vectors,
                dual_coef,
                ..
            } => {
                support_vectors
                    .iter()
                    .zip(dual_coef)
                    .map(|(sv, a)| a * rbf(*gamma, sv, z))
                    .sum::<f64>()
                    + bias
            }
        }
    }
}

/// Transform settings a model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelTransform {
    pub csf: Option<CsfMethod>,
    pub levels: usize,
    pub sast: bool,
    #[serde(serialize_with = "num::f64")]
    pub dh_ratio: f64,
}

impl From<TransformConfig> for ModelTransform {
    fn from(c: TransformConfig) -> Self {
        ModelTransform {
            csf: c.csf,
            levels: c.levels,
            sast: c.use_sast,
            dh_ratio: c.dh_ratio,
        }
    }
}

impl From<ModelTransform> for TransformConfig {
    fn from(m: ModelTransform) -> Self {
        TransformConfig {
            levels: m.levels,
            csf: m.csf,
            use_sast: m.sast,
            dh_ratio: m.dh_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub version: u32,
    pub preset: Option<String>,
    pub feature_ids: Vec<FeatureId>,
    pub norm: Normalization,
    pub regressor: Regressor,
    #[serde(serialize_with = "num::pair")]
    pub target_range: (f64, f64),
    pub transform: Option<ModelTransform>,
}

/// Trains on a dense matrix whose columns follow `ids`.
pub fn train_matrix(ids: &[FeatureId], x: &[Vec<f64>], mos: &[f64], cfg: &TrainConfig) -> Result<FusionModel> {
    if x.len() != mos.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows and MOS",
            left: x.len(),
            right: mos.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: x.len() });
    }
    if ids.is_empty() {
        return Err(Error::Invalid("no features to train on".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != ids.len()) {
        return Err(Error::InconsistentFeatures { index: i });
    }
    if let Some(i) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Invalid(format!("sample {i} has a non-finite feature")));
    }
    if mos.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite MOS".into()));
    }

    let norm = Normalization::fit(ids, x)?;
    let z: Vec<Vec<f64>> = x.iter().map(|r| norm.apply(r)).collect();
    let lo = mos.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t: Vec<f64> = mos
        .iter()
        .map(|&m| if hi > lo { (m - lo) / (hi - lo) } else { 0.0 })
        .collect();

    let regressor = match cfg.kind {
        RegressorKind::Linear => fit_ridge(&z, &t, cfg.ridge_lambda)?,
        RegressorKind::Svr => {
            let gamma = cfg.gamma.unwrap_or(1.0 / ids.len() as f64);
            fit_svr(&z, &t, gamma, cfg)?
        }
    };
    Ok(FusionModel {
        version: MODEL_VERSION,
        preset: None,
        feature_ids: ids.to_vec(),
        norm,
        regressor,
        target_range: (lo, hi),
        transform: None,
    })
}

/// Trains on pooled feature vectors; every sample must carry the same ids.
pub fn train(samples: &[FeatureVector], mos: &[f64], cfg: &TrainConfig) -> Result<FusionModel> {
    let first = samples.first().ok_or(Error::TooFewSamples { needed: 2, got: 0 })?;
    let ids: Vec<FeatureId> = first.ids().copied().collect();
    let mut x = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.len() != ids.len() {
            return Err(Error::InconsistentFeatures { index: i });
        }
        let row: Option<Vec<f64>> = ids.iter().map(|id| s.get(id)).collect();
        x.push(row.ok_or(Error::InconsistentFeatures { index: i })?);
    }
    train_matrix(&ids, &x, mos, cfg)
}

/// Ridge regression on centred inputs via SVD; with `lambda = 0` this is the
/// minimum-norm least-squares solution.
fn fit_ridge(z: &[Vec<f64>], t: &[f64], lambda: f64) -> Result<Regressor> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (n, p) = (z.len(), z[0].len());
    let col_mean: Vec<f64> = (0..p).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let t_mean = t.iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, p, |i, j| z[i][j] - col_mean[j]);
    let r = DVector::from_fn(n, |i, _| t[i] - t_mean);
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u computed"), svd.v_t.as_ref().expect("v_t computed"));
    let s_max = svd.singular_values.max();
    let cutoff = s_max * n.max(p) as f64 * f64::EPSILON;
    let ut_r = u.transpose() * &r;
    let mut coef = DVector::zeros(svd.singular_values.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            coef[k] = ut_r[k] * s / (s * s + lambda);
        }
    }
    let w = vt.transpose() * coef;
    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = t_mean - weights.iter().zip(&col_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(Regressor::Linear {
        weights,
        bias,
        ridge_lambda: lambda,
    })
}

/// ε-SVR with an RBF kernel, solved by sequential minimal optimization with
/// second-order working-set selection over the 2n dual variables.
fn fit_svr(z: &[Vec<f64>], t: &[f64], gamma: f64, cfg: &TrainConfig) -> Result<Regressor> {
    let (c, eps) = (cfg.c, cfg.epsilon);
    if !(c > 0.0 && eps >= 0.0 && gamma > 0.0) {
        return Err(Error::Invalid(format!(
            "SVR needs C > 0, epsilon >= 0, gamma > 0 (got {c}, {eps}, {gamma})"
        )));
    }
    let n = z.len();
    let kernel: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rbf(gamma, &z[i], &z[j])).collect()).collect();
    let l = 2 * n;
    let y: Vec<f64> = (0..l).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let kd = |i: usize| kernel[i % n][i % n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i % n][j % n];
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l).map(|i| if i < n { eps - t[i] } else { eps + t[i - n] }).collect();

    let mut iter = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = None;
        for k in 0..l {
            let up = if y[k] > 0.0 { alpha[k] < c } else { alpha[k] > 0.0 };
            if up && -y[k] * grad[k] >= gmax {
                gmax = -y[k] * grad[k];
                sel_i = Some(k);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = sel_i {
            for k in 0..l {
                let low = if y[k] > 0.0 { alpha[k] > 0.0 } else { alpha[k] < c };
                if !low {
                    continue;
                }
                let yg = y[k] * grad[k];
                gmax2 = gmax2.max(yg);
                let diff = gmax + yg;
                if diff > 0.0 {
                    let quad = (kd(i) + kd(k) - 2.0 * kernel[i % n][k % n]).max(TAU);
                    let obj = -(diff * diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        sel_j = Some(k);
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        let (i, j) = match (sel_i, sel_j) {
            (Some(i), Some(j)) if gap >= cfg.tolerance => (i, j),
            _ => break,
        };
        if iter >= cfg.max_iterations {
            return Err(Error::Convergence {
                iterations: iter,
                gap,
                tolerance: cfg.tolerance,
            });
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (kd(i) + kd(j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (kd(i) + kd(j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += q(i, k) * di + q(j, k) * dj;
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for k in 0..l {
        let yg = y[k] * grad[k];
        if alpha[k] >= c {
            if y[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if y[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for k in 0..n {
        let beta = alpha[k] - alpha[k + n];
        if beta != 0.0 {
            support_vectors.push(z[k].clone());
            dual_coef.push(beta);
        }
    }
    Ok(Regressor::Svr {
        gamma,
        c,
        epsilon: eps,
        bias: -rho,
        support_vectors,
        dual_coef,
    })
}

impl FusionModel {
    pub fn with_preset(mut self, preset: impl Into<String>) -> Self {
        self.preset = Some(preset.into());
        self
    }

    pub fn with_transform(mut self, transform: TransformConfig) -> Self {
        self.transform = Some(transform.into());
        self
    }

    /// Score for one row given in `feature_ids` order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s = self.regressor.eval(&self.norm.apply(row));
        let (lo, hi) = self.target_range;
        lo + s * (hi - lo)
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        let row = self
            .feature_ids
            .iter()
            .map(|id| features.get(id).ok_or(Error::MissingFeature(*id)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.predict_row(&row))
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.feature_ids.len();
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.version != MODEL_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if p == 0 || self.norm.mean.len() != p || self.norm.std.len() != p {
            return bad("normalization does not match feature list".into());
        }
        if let Some(j) = self.norm.std.iter().position(|s| s.is_nan() || *s <= 0.0) {
            return bad(format!("non-positive std for {}", self.feature_ids[j]));
        }
        match &self.regressor {
            Regressor::Linear { weights, .. } if weights.len() != p => bad("weight count mismatch".into()),
            Regressor::Svr {
                support_vectors,
                dual_coef,
                ..
            } if support_vectors.len() != dual_coef.len() || support_vectors.iter().any(|s| s.len() != p) => {
                bad("support vector shape mismatch".into())
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model = Self::from_json(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        model.validate()?;
        Ok(model)
    }
}
