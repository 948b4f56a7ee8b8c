//! Rank statistics over labeled scores: AUROC and averaged AUPR.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Higher means more likely correct.
    Confidence,
    /// Higher means more likely incorrect.
    Uncertainty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: f64,
    pub correct: bool,
    pub polarity: Polarity,
}

impl LabeledScore {
    pub fn new(score: f64, correct: bool, polarity: Polarity) -> Self {
        Self {
            score,
            correct,
            polarity,
        }
    }
}

fn class_counts(scores: &[LabeledScore]) -> Result<(usize, usize), EvalError> {
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(EvalError::NonFiniteScore(bad.score));
    }
    let pos = scores.iter().filter(|s| s.correct).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass {
            correct: pos,
            incorrect: neg,
        });
    }
    Ok((pos, neg))
}

fn ascending(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("scores are finite")
}

/// Mann-Whitney AUROC of `scores` read as confidences, with tied groups
/// given their mid-rank.
fn confidence_auroc(scores: &[(f64, bool)], pos: usize, neg: usize) -> f64 {
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| ascending(&a.0, &b.0));
    // Sum of 1-based ranks of the correct items; every partial value is a
    // multiple of 0.5 and stays exact in f64.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].0 == sorted[start].0 {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let correct_in_group = sorted[start..end].iter().filter(|s| s.1).count();
        rank_sum += mid_rank * correct_in_group as f64;
        start = end;
    }
    let pos_f = pos as f64;
    let u = rank_sum - pos_f * (pos_f + 1.0) / 2.0;
    u / (pos_f * neg as f64)
}

/// Probability that a random correct item out-ranks a random incorrect one
/// under the score's polarity, ties counting one half.
///
/// Input with a single class has no defined AUROC and is an error.
pub fn auroc(scores: &[LabeledScore]) -> Result<f64, EvalError> {
    let (pos, neg) = class_counts(scores)?;
    let polarity = scores[0].polarity;
    if scores.iter().any(|s| s.polarity != polarity) {
        return Err(EvalError::MixedPolarity);
    }
    let raw: Vec<(f64, bool)> = scores.iter().map(|s| (s.score, s.correct)).collect();
    let conf = confidence_auroc(&raw, pos, neg);
    Ok(match polarity {
        Polarity::Confidence => conf,
        Polarity::Uncertainty => 1.0 - conf,
    })
}

/// Step-wise average precision: sum over distinct thresholds of
/// `(R_k - R_{k-1}) * P_k`, ranking by `key` descending.
fn average_precision(items: &[(f64, bool)]) -> f64 {
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| ascending(&b.0, &a.0));
    let total_pos = sorted.iter().filter(|s| s.1).count() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].0 == sorted[start].0 {
            end += 1;
        }
        for s in &sorted[start..end] {
            if s.1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / total_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    ap
}

/// Mean of two average precisions: correct items as the positive class
/// ranked by confidence, and incorrect items as the positive class ranked
/// by uncertainty.
pub fn aupr_average(scores: &[LabeledScore]) -> Result<f64, EvalError> {
    class_counts(scores)?;
    let polarity = scores[0].polarity;
    if scores.iter().any(|s| s.polarity != polarity) {
        return Err(EvalError::MixedPolarity);
    }
    let sign = match polarity {
        Polarity::Confidence => 1.0,
        Polarity::Uncertainty => -1.0,
    };
    let correct_pos: Vec<(f64, bool)> = scores.iter().map(|s| (sign * s.score, s.correct)).collect();
    let incorrect_pos: Vec<(f64, bool)> = scores.iter().map(|s| (-sign * s.score, !s.correct)).collect();
    Ok(0.5 * (average_precision(&correct_pos) + average_precision(&incorrect_pos)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conf(pairs: &[(f64, bool)]) -> Vec<LabeledScore> {
        pairs
            .iter()
            .map(|&(s, c)| LabeledScore::new(s, c, Polarity::Confidence))
            .collect()
    }

    #[test]
    fn auroc_cases() {
        let sep = conf(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
        assert_eq!(auroc(&sep).unwrap(), 1.0);

        let ties = conf(&[(0.5, true), (0.5, false), (0.5, true), (0.5, false)]);
        assert_eq!(auroc(&ties).unwrap(), 0.5);

        let hand = conf(&[(0.9, true), (0.7, true), (0.8, false), (0.6, false)]);
        assert_eq!(auroc(&hand).unwrap(), 0.75);
    }

    #[test]
    fn uncertainty_polarity_flips() {
        let hand = conf(&[(0.9, true), (0.7, true), (0.8, false), (0.6, false)]);
        let flipped: Vec<_> = hand
            .iter()
            .map(|s| LabeledScore::new(s.score, s.correct, Polarity::Uncertainty))
            .collect();
        assert_eq!(auroc(&flipped).unwrap(), 0.25);
    }

    #[test]
    fn single_class_is_undefined() {
        let one = conf(&[(0.9, true), (0.7, true)]);
        assert_eq!(
            auroc(&one),
            Err(EvalError::SingleClass {
                correct: 2,
                incorrect: 0
            })
        );
        assert!(aupr_average(&one).is_err());
        assert!(auroc(&[]).is_err());
    }

    #[test]
    fn aupr_cases() {
        let sep = conf(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
        assert_eq!(aupr_average(&sep).unwrap(), 1.0);

        let ties = conf(&[(0.5, true), (0.5, false), (0.5, true), (0.5, false)]);
        assert_eq!(aupr_average(&ties).unwrap(), 0.5);

        let two = conf(&[(0.9, true), (0.8, false)]);
        assert_eq!(aupr_average(&two).unwrap(), 1.0);
    }

    #[test]
    fn average_precision_by_hand() {
        // ranking: + - + -  -> AP = (1/2)*1 + (1/2)*(2/3)
        let ap = average_precision(&[(4.0, true), (3.0, false), (2.0, true), (1.0, false)]);
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nan() {
        let bad = conf(&[(f64::NAN, true), (0.1, false)]);
        assert!(matches!(auroc(&bad), Err(EvalError::NonFiniteScore(_))));
    }
}
