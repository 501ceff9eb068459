//! Rank correlation, Fisher averaging and train-on-one, test-on-another
//! evaluation across databases.

use funque_core::FeatureId;
use rayon::prelude::*;

use crate::cache::FeatureTable;
use crate::error::{Error, Result};
use crate::fusion::{train_matrix, TrainConfig};

/// Correlations are clamped to this magnitude before `atanh`.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Srocc {
    pub value: f64,
    /// Set when either input is constant; `value` is then 0.
    pub degenerate: bool,
}

/// 1-based ranks; tied values share their mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = r;
        }
        i = j;
    }
    out
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

pub fn srocc(pred: &[f64], mos: &[f64]) -> Result<Srocc> {
    if pred.len() != mos.len() {
        return Err(Error::LengthMismatch {
            what: "predictions and MOS",
            left: pred.len(),
            right: mos.len(),
        });
    }
    if pred.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: pred.len(),
        });
    }
    if pred.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite value in SROCC input".into()));
    }
    Ok(match pearson(&ranks(pred), &ranks(mos)) {
        Some(value) => Srocc {
            value,
            degenerate: false,
        },
        None => Srocc {
            value: 0.0,
            degenerate: true,
        },
    })
}

/// `tanh` of the mean `atanh` of the inputs. Equal inputs are returned
/// unchanged, since `tanh(atanh(r))` is not bit-exact.
pub fn fisher_mean(rs: &[f64]) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::Invalid("Fisher mean of an empty list".into()));
    }
    if let Some(r) = rs.iter().find(|r| r.is_nan() || r.abs() > 1.0) {
        return Err(Error::Invalid(format!("correlation {r} outside [-1, 1]")));
    }
    if rs.iter().all(|&r| r == rs[0]) {
        return Ok(rs[0]);
    }
    let z = rs.iter().map(|r| r.clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh()).sum::<f64>() / rs.len() as f64;
    Ok(z.tanh())
}

/// Trains on `train` and returns SROCC of its predictions on `test`.
pub fn train_test_srocc(train: &FeatureTable, test: &FeatureTable, ids: &[FeatureId], cfg: &TrainConfig) -> Result<f64> {
    let model = train_matrix(ids, &train.columns(ids)?, &train.mos, cfg)?;
    let pred: Vec<f64> = test.columns(ids)?.iter().map(|r| model.predict_row(r)).collect();
    Ok(srocc(&pred, &test.mos)?.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossDbResult {
    pub databases: Vec<String>,
    /// `matrix[train][test]`; `None` on the diagonal and for failed pairs.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub failures: Vec<(usize, usize, String)>,
    /// Fisher mean over each test column, if any entry succeeded.
    pub column_means: Vec<Option<f64>>,
    pub overall: f64,
}

impl CrossDbResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.matrix
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter_map(move |(j, v)| v.map(|v| (i, j, v))))
    }

    /// Rows are training databases, columns test databases.
    pub fn to_table(&self) -> String {
        let width = self.databases.iter().map(|d| d.len()).max().unwrap_or(0).max(8);
        let mut s = format!("{:width$}", "train\\test");
        for d in &self.databases {
            s += &format!("  {d:>width$}");
        }
        s.push('\n');
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for (i, d) in self.databases.iter().enumerate() {
            s += &format!("{d:width$}");
            for v in &self.matrix[i] {
                s += &format!("  {:>width$}", cell(*v));
            }
            s.push('\n');
        }
        s += &format!("{:width$}", "FMean");
        for v in &self.column_means {
            s += &format!("  {:>width$}", cell(*v));
        }
        s += &format!("\noverall Fisher mean: {:.4}\n", self.overall);
        if !self.is_complete() {
            s += &format!("incomplete: {} pair(s) failed\n", self.failures.len());
        }
        s
    }
}

/// Every ordered pair of distinct databases, overall score the Fisher mean.
pub fn cross_db_srocc(databases: &[FeatureTable], ids: &[FeatureId], cfg: &TrainConfig) -> Result<CrossDbResult> {
    let n = databases.len();
    if n < 2 {
        return Err(Error::Invalid("cross-database evaluation needs at least two databases".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let results: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| train_test_srocc(&databases[i], &databases[j], ids, cfg))
        .collect();

    let mut matrix = vec![vec![None; n]; n];
    let mut failures = Vec::new();
    for (&(i, j), r) in pairs.iter().zip(results) {
        match r {
            Ok(v) => matrix[i][j] = Some(v),
            Err(e) => failures.push((i, j, e.to_string())),
        }
    }
    let all: Vec<f64> = matrix.iter().flatten().flatten().copied().collect();
    if all.is_empty() {
        let (_, _, first) = &failures[0];
        return Err(Error::Invalid(format!("every train/test pair failed; first error: {first}")));
    }
    let column_means = (0..n)
        .map(|j| {
            let col: Vec<f64> = (0..n).filter_map(|i| matrix[i][j]).collect();
            if col.is_empty() {
                None
            } else {
                fisher_mean(&col).ok()
            }
        })
        .collect();
    Ok(CrossDbResult {
        databases: databases.iter().map(|d| d.name.clone()).collect(),
        matrix,
        failures,
        column_means,
        overall: fisher_mean(&all)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use funque_core::io::Channel;
    use funque_core::FeatureKind;

    #[test]
    fn tie_aware_ranks() {
        assert_eq!(ranks(&[1.0, 2.0, 2.0, 4.0]), [1.0, 2.5, 2.5, 4.0]);
        assert_eq!(ranks(&[3.0, 1.0, 2.0]), [3.0, 1.0, 2.0]);
        assert_eq!(ranks(&[5.0, 5.0, 5.0]), [2.0, 2.0, 2.0]);
    }

    #[test]
    fn srocc_cases() {
        let mos = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(srocc(&[0.1, 0.5, 0.7, 9.0], &mos).unwrap().value, 1.0);
        assert_eq!(srocc(&[4.0, 3.0, 2.0, 1.0], &mos).unwrap().value, -1.0);
        // Hand-ranked Pearson of [1, 2.5, 2.5, 4] against [1, 2, 3, 4].
        let rx = [1.0, 2.5, 2.5, 4.0];
        let mx = rx.iter().sum::<f64>() / 4.0;
        let num: f64 = rx.iter().zip(&mos).map(|(a, b)| (a - mx) * (b - 2.5)).sum();
        let den = (rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>() * 5.0).sqrt();
        let got = srocc(&[1.0, 2.0, 2.0, 4.0], &mos).unwrap();
        assert!((got.value - num / den).abs() < 1e-15);
        let flat = srocc(&[2.0; 4], &mos).unwrap();
        assert_eq!((flat.value, flat.degenerate), (0.0, true));
        assert!(srocc(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fisher_values() {
        assert!((fisher_mean(&[0.2, 0.8]).unwrap() - 0.5722).abs() < 1e-4);
        assert_eq!(fisher_mean(&[0.5, 0.5]).unwrap(), 0.5);
        assert!(fisher_mean(&[1.0, 1.0]).unwrap() > 0.9999);
        assert!(fisher_mean(&[]).is_err());
        assert!(fisher_mean(&[1.5]).is_err());
    }

    fn table(name: &str, offset: f64) -> FeatureTable {
        let id = FeatureId::new(Channel::Y, FeatureKind::Ssim, 1);
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 + offset]).collect();
        let mos = (0..12).map(|i| (i as f64).sqrt()).collect();
        FeatureTable::new(name, vec![id], rows, mos).unwrap()
    }

    #[test]
    fn cross_db_layout() {
        let dbs = [table("a", 0.0), table("b", 3.0), table("c", -1.0)];
        let r = cross_db_srocc(&dbs, &dbs[0].ids, &TrainConfig::linear()).unwrap();
        assert_eq!(r.entries().count(), 6);
        assert!(r.entries().all(|(i, j, v)| i != j && (v - 1.0).abs() < 1e-12));
        assert!((r.overall - 1.0).abs() < 1e-6);
        assert!(r.to_table().contains("overall Fisher mean"));
    }
}
