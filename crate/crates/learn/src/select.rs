//! Feature buckets and constrained greedy feature selection.
//!
//! A bucket holds alternative feature groups of one type; a group is taken
//! or left as a whole, and at most one group is taken from each bucket.

use funque_core::io::Channel;
use funque_core::{FeatureId, FeatureKind};
use rayon::prelude::*;

use crate::cache::FeatureTable;
use crate::error::{Error, Result};
use crate::eval::cross_db_srocc;
use crate::fusion::TrainConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBucket {
    pub name: String,
    pub groups: Vec<Vec<FeatureId>>,
}

impl FeatureBucket {
    pub fn new(name: impl Into<String>, groups: Vec<Vec<FeatureId>>) -> Self {
        FeatureBucket {
            name: name.into(),
            groups,
        }
    }
}

/// The five bucket types for one channel at coarsest level `levels`.
pub fn standard_buckets(channel: Channel, levels: usize) -> Vec<FeatureBucket> {
    use FeatureKind::*;
    let l = levels;
    let one = |k: FeatureKind| vec![FeatureId::new(channel, k, l)];
    let all_levels = |kinds: &[FeatureKind]| -> Vec<FeatureId> {
        (1..=l)
            .flat_map(|lv| kinds.iter().map(move |&k| FeatureId::new(channel, k, lv)))
            .collect()
    };
    let pair = |a: FeatureKind, b: FeatureKind| vec![FeatureId::new(channel, a, l), FeatureId::new(channel, b, l)];
    let named = |n: &str| format!("{channel}-{n}");
    vec![
        FeatureBucket::new(named("SSIM"), vec![one(Ssim), one(Essim), one(MsSsim), one(MsEssim)]),
        FeatureBucket::new(
            named("Info"),
            vec![
                one(VifHv),
                all_levels(&[VifA]),
                one(StrredHv),
                pair(SrredHv, TrredHv),
                all_levels(&[StrredA]),
                all_levels(&[SrredA, TrredA]),
            ],
        ),
        FeatureBucket::new(named("DLM"), vec![one(DlmS), all_levels(&[DlmS])]),
        FeatureBucket::new(
            named("Sharpness"),
            vec![one(Blur), one(Edge), pair(Blur, Edge), one(DeltaTlSai), one(DeltaTlBlur)],
        ),
        FeatureBucket::new(named("MAD"), vec![one(MadRef), one(MadDis), one(Mad)]),
    ]
}

/// One copy of the standard buckets per channel.
pub fn buckets_for(channels: &[Channel], levels: usize) -> Vec<FeatureBucket> {
    channels.iter().flat_map(|&c| standard_buckets(c, levels)).collect()
}

/// Every feature any bucket group refers to, sorted.
pub fn bucket_features(buckets: &[FeatureBucket]) -> Vec<FeatureId> {
    let mut v: Vec<FeatureId> = buckets.iter().flat_map(|b| b.groups.iter().flatten().copied()).collect();
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub pass: usize,
    pub bucket: usize,
    pub group: usize,
    pub candidate: Vec<FeatureId>,
    /// Cross-database SROCC, or the error that prevented evaluation.
    pub outcome: std::result::Result<f64, String>,
    pub became_best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub features: Vec<FeatureId>,
    /// `(bucket, group)` indices in the order they were chosen.
    pub chosen: Vec<(usize, usize)>,
    pub srocc: f64,
    pub passes: usize,
    pub audit: Vec<AuditEntry>,
}

fn union(base: &[FeatureId], group: &[FeatureId]) -> Vec<FeatureId> {
    let mut v = base.to_vec();
    for id in group {
        if !v.contains(id) {
            v.push(*id);
        }
    }
    v
}

fn score(set: &[FeatureId], databases: &[FeatureTable], cfg: &TrainConfig) -> std::result::Result<f64, String> {
    cross_db_srocc(databases, set, cfg)
        .map(|r| r.overall)
        .map_err(|e| e.to_string())
}

/// Greedy forward selection under the one-group-per-bucket constraint.
///
/// Each pass scans every group of every available bucket in order and keeps
/// the candidate whose cross-database SROCC strictly beats the best so far;
/// the best score carries over between passes. A pass without improvement
/// ends the search. Candidates that fail to evaluate are skipped and kept in
/// the audit trail.
pub fn cgfs(buckets: &[FeatureBucket], databases: &[FeatureTable], cfg: &TrainConfig) -> Result<Selection> {
    if databases.len() < 2 {
        return Err(Error::Invalid("feature selection needs at least two databases".into()));
    }
    let mut greedy: Vec<FeatureId> = Vec::new();
    let mut available: Vec<usize> = (0..buckets.len()).collect();
    let mut best = -1.0;
    let mut chosen = Vec::new();
    let mut audit = Vec::new();
    let mut passes = 0;

    while !available.is_empty() {
        passes += 1;
        let candidates: Vec<(usize, usize, Vec<FeatureId>)> = available
            .iter()
            .flat_map(|&b| {
                let greedy = &greedy;
                buckets[b].groups.iter().enumerate().map(move |(g, grp)| (b, g, union(greedy, grp)))
            })
            .collect();
        let outcomes: Vec<_> = candidates.par_iter().map(|(_, _, set)| score(set, databases, cfg)).collect();

        let mut pick: Option<(usize, usize, Vec<FeatureId>)> = None;
        for ((b, g, set), outcome) in candidates.into_iter().zip(outcomes) {
            let became_best = matches!(outcome, Ok(v) if v > best);
            if let (true, Ok(v)) = (became_best, &outcome) {
                best = *v;
                pick = Some((b, g, set.clone()));
            }
            audit.push(AuditEntry {
                pass: passes,
                bucket: b,
                group: g,
                candidate: set,
                outcome,
                became_best,
            });
        }
        match pick {
            Some((b, g, set)) => {
                greedy = set;
                chosen.push((b, g));
                available.retain(|&x| x != b);
            }
            None => break,
        }
    }
    Ok(Selection {
        features: greedy,
        chosen,
        srocc: best,
        passes,
        audit,
    })
}

/// Exhaustive search over every admissible non-empty selection (at most one
/// group per bucket). Only practical for tiny instances.
pub fn cefs(buckets: &[FeatureBucket], databases: &[FeatureTable], cfg: &TrainConfig) -> Result<Selection> {
    let radices: Vec<usize> = buckets.iter().map(|b| b.groups.len() + 1).collect();
    let total: usize = radices.iter().product();
    let choices: Vec<Vec<Option<usize>>> = (1..total)
        .map(|mut code| {
            radices
                .iter()
                .map(|&r| {
                    let d = code % r;
                    code /= r;
                    d.checked_sub(1)
                })
                .collect()
        })
        .collect();
    let sets: Vec<Vec<FeatureId>> = choices
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .filter_map(|(b, g)| g.map(|g| &buckets[b].groups[g]))
                .fold(Vec::new(), |acc, grp| union(&acc, grp))
        })
        .collect();
    let outcomes: Vec<_> = sets.par_iter().map(|s| score(s, databases, cfg)).collect();

    let mut best: Option<(usize, f64)> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if let Ok(v) = o {
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((k, *v));
            }
        }
    }
    let (k, srocc) = best.ok_or_else(|| Error::Invalid("no admissible feature set could be evaluated".into()))?;
    Ok(Selection {
        features: sets[k].clone(),
        chosen: choices[k]
            .iter()
            .enumerate()
            .filter_map(|(b, g)| g.map(|g| (b, g)))
            .collect(),
        srocc,
        passes: 1,
        audit: Vec::new(),
    })
}
