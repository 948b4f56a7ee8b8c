//! Robustness studies: reference-count ablation, per-beam-group AUROC and
//! Rouge-L threshold sweeps.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ranking::{aupr_average, auroc, LabeledScore};
use super::rouge::is_correct;
use super::EvalError;
use crate::density::DensityEstimator;
use crate::geometry::RelationMatrix;
use crate::par::{self, Execution};
use crate::record::{dedup_responses, GenerationRecord};
use crate::score::{Metric, ScoreConfig, ScoreError, ScoreSet};

/// Metric values paired with labels at `threshold`; entries lacking either are dropped.
pub fn labeled(scores: &[&ScoreSet], metric: Metric, threshold: f64) -> Vec<LabeledScore> {
    scores
        .iter()
        .filter_map(|s| {
            let value = metric.value(s)?;
            let correct = s.label_at(threshold)?;
            Some(LabeledScore::new(value, correct, metric.polarity()))
        })
        .collect()
}

pub fn metric_auroc(scores: &[&ScoreSet], metric: Metric, threshold: f64) -> Result<f64, EvalError> {
    auroc(&labeled(scores, metric, threshold))
}

pub fn metric_aupr(scores: &[&ScoreSet], metric: Metric, threshold: f64) -> Result<f64, EvalError> {
    aupr_average(&labeled(scores, metric, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationPoint {
    pub k: usize,
    pub auroc: Option<f64>,
    /// Target responses that entered the AUROC.
    pub n: usize,
    pub records_used: usize,
    /// Records with fewer than `k` unique responses.
    pub records_skipped: usize,
}

/// The first `k` responses by ascending beam group (ties by index), returned
/// in ascending index order. `None` when the record has fewer than `k`.
pub fn ablation_references(record: &GenerationRecord, k: usize) -> Option<Vec<usize>> {
    if k == 0 || record.responses.len() < k {
        return None;
    }
    let mut order: Vec<usize> = (0..record.responses.len()).collect();
    order.sort_by_key(|&i| (record.responses[i].beam_group, i));
    let mut refs = order[..k].to_vec();
    refs.sort_unstable();
    Some(refs)
}

type RecordAblation = Vec<Option<Vec<(f64, bool)>>>;

fn ablate_record(record: &GenerationRecord, ks: &[usize], cfg: &ScoreConfig) -> Result<RecordAblation, ScoreError> {
    let record = dedup_responses(record);
    let relations = RelationMatrix::from_record(&record);
    let estimator = DensityEstimator::new(&record, &relations, &cfg.density)?;
    let labels: Vec<bool> = record
        .responses
        .iter()
        .map(|r| is_correct(cfg.rouge(&r.text, &record.gold_answers), cfg.rouge_threshold))
        .collect();
    ks.iter()
        .map(|&k| {
            let Some(refs) = ablation_references(&record, k) else {
                return Ok(None);
            };
            (0..record.responses.len())
                .map(|t| Ok((estimator.semantic_density_with_references(t, &refs)?, labels[t])))
                .collect::<Result<Vec<_>, ScoreError>>()
                .map(Some)
        })
        .collect()
}

/// Semantic-density AUROC over the corpus for each reference count in `ks`.
pub fn ablation_points(
    records: &[GenerationRecord],
    ks: &[usize],
    cfg: &ScoreConfig,
    exec: Execution,
) -> Result<Vec<AblationPoint>, EvalError> {
    let per_record = par::map(records, exec, |r| ablate_record(r, ks, cfg));
    let per_record = per_record.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let mut items = Vec::new();
            let (mut used, mut skipped) = (0, 0);
            for rec in &per_record {
                match &rec[slot] {
                    Some(scores) => {
                        used += 1;
                        items.extend(
                            scores
                                .iter()
                                .map(|&(s, c)| LabeledScore::new(s, c, Metric::SemanticDensity.polarity())),
                        );
                    }
                    None => skipped += 1,
                }
            }
            AblationPoint {
                k,
                auroc: auroc(&items).ok(),
                n: items.len(),
                records_used: used,
                records_skipped: skipped,
            }
        })
        .collect())
}

pub fn ablate_reference_count(
    records: &[GenerationRecord],
    k: usize,
    cfg: &ScoreConfig,
    exec: Execution,
) -> Result<AblationPoint, EvalError> {
    Ok(ablation_points(records, &[k], cfg, exec)?.remove(0))
}

/// Points for `k = 1..=max_k`.
pub fn ablation_curve(
    records: &[GenerationRecord],
    max_k: usize,
    cfg: &ScoreConfig,
    exec: Execution,
) -> Result<Vec<AblationPoint>, EvalError> {
    let ks: Vec<usize> = (1..=max_k).collect();
    ablation_points(records, &ks, cfg, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupAuroc {
    pub beam_group: u32,
    pub n: usize,
    pub n_correct: usize,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBreakdown {
    pub groups: Vec<GroupAuroc>,
    /// Groups whose targets were all correct or all incorrect.
    pub skipped: usize,
}

/// AUROC computed separately over the targets of each beam group.
pub fn per_group_auroc(scores: &[&ScoreSet], metric: Metric, threshold: f64) -> GroupBreakdown {
    let mut by_group: BTreeMap<u32, Vec<&ScoreSet>> = BTreeMap::new();
    for s in scores {
        by_group.entry(s.beam_group).or_default().push(s);
    }
    let mut skipped = 0;
    let groups = by_group
        .into_iter()
        .map(|(beam_group, members)| {
            let items = labeled(&members, metric, threshold);
            let result = auroc(&items).ok();
            if result.is_none() {
                skipped += 1;
            }
            GroupAuroc {
                beam_group,
                n: items.len(),
                n_correct: items.iter().filter(|i| i.correct).count(),
                auroc: result,
            }
        })
        .collect();
    GroupBreakdown { groups, skipped }
}

pub const DEFAULT_SWEEP: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Aligned with the `metrics` argument of the sweep.
    pub auroc: Vec<Option<f64>>,
}

/// Relabels every response at each threshold and recomputes AUROC per metric.
pub fn rouge_threshold_sweep(scores: &[&ScoreSet], thresholds: &[f64], metrics: &[Metric]) -> Vec<SweepPoint> {
    thresholds
        .iter()
        .map(|&threshold| SweepPoint {
            threshold,
            auroc: metrics
                .iter()
                .map(|&m| metric_auroc(scores, m, threshold).ok())
                .collect(),
        })
        .collect()
}
