//! Semantic density: a probability-weighted kernel density estimate of a
//! target response among the reference responses sampled for its prompt.

use thiserror::Error;

use crate::geometry::RelationMatrix;
use crate::record::{GenerationRecord, ResponseSample};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("response {index} has no tokens")]
    EmptyTokens { index: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("no reference responses")]
    ZeroReferences,
    #[error("{have} reference responses, at least {need} required")]
    TooFewReferences { have: usize, need: usize },
    #[error("no relation recorded between responses {i} and {j}")]
    MissingRelation { i: usize, j: usize },
    #[error("target {target} out of range for {len} responses")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("reference {index} out of range for {len} responses")]
    ReferenceOutOfRange { index: usize, len: usize },
    #[error("total reference count is zero")]
    ZeroTotalCount,
    #[error("reference weights are not finite")]
    NonFiniteWeight,
}

/// Log of a length-normalized (and possibly temperature-scaled) sequence probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceWeight {
    pub log_norm_prob: f64,
    pub temperature_applied: f64,
}

impl SequenceWeight {
    pub fn prob(&self) -> f64 {
        self.log_norm_prob.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityConfig {
    pub temperature: f64,
    /// Count the target among its own references when its probability is known.
    pub use_target_as_reference: bool,
    pub min_references: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            use_target_as_reference: true,
            min_references: 1,
        }
    }
}

impl DensityConfig {
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

/// `(1/L) * sum(token log-probs)`, the log of the L-th root of the sequence probability.
pub fn length_normalized_logprob(sample: &ResponseSample) -> Result<SequenceWeight, DensityError> {
    if sample.num_tokens == 0 || sample.token_logprobs.is_empty() {
        return Err(DensityError::EmptyTokens { index: 0 });
    }
    Ok(SequenceWeight {
        log_norm_prob: sample.sequence_logprob() / sample.num_tokens as f64,
        temperature_applied: 1.0,
    })
}

/// Raises every token probability to `1/T`, i.e. divides the log weight by `T`.
pub fn apply_temperature(w: SequenceWeight, temperature: f64) -> Result<SequenceWeight, DensityError> {
    if temperature.is_nan() || temperature <= 0.0 || temperature.is_infinite() {
        return Err(DensityError::NonPositiveTemperature(temperature));
    }
    Ok(SequenceWeight {
        log_norm_prob: w.log_norm_prob / temperature,
        temperature_applied: w.temperature_applied * temperature,
    })
}

/// `sum(w_i * k_i) / sum(w_i)` with weights given in log space.
///
/// The largest log weight is subtracted before exponentiating, so at least
/// one weight is exactly 1 and the denominator cannot underflow.
pub fn weighted_kernel_mean(log_weights: &[f64], kernels: &[f64]) -> Result<f64, DensityError> {
    debug_assert_eq!(log_weights.len(), kernels.len());
    if log_weights.is_empty() {
        return Err(DensityError::ZeroReferences);
    }
    let shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(DensityError::NonFiniteWeight);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&lw, &k) in log_weights.iter().zip(kernels) {
        let w = (lw - shift).exp();
        num += w * k;
        den += w;
    }
    Ok(num / den)
}

/// `sum(n_i * k_i) / sum(n_i)` over integer occurrence counts.
pub fn count_weighted_kernel_mean(counts: &[u32], kernels: &[f64]) -> Result<f64, DensityError> {
    debug_assert_eq!(counts.len(), kernels.len());
    let total: u64 = counts.iter().map(|&n| u64::from(n)).sum();
    if total == 0 {
        return Err(DensityError::ZeroTotalCount);
    }
    let num: f64 = counts.iter().zip(kernels).map(|(&n, &k)| f64::from(n) * k).sum();
    Ok(num / total as f64)
}

/// Per-record state shared by every target of that record.
#[derive(Debug, Clone)]
pub struct DensityEstimator<'a> {
    record: &'a GenerationRecord,
    relations: &'a RelationMatrix,
    log_weights: Vec<f64>,
    cfg: DensityConfig,
}

impl<'a> DensityEstimator<'a> {
    /// `record` should already be deduplicated.
    pub fn new(
        record: &'a GenerationRecord,
        relations: &'a RelationMatrix,
        cfg: &DensityConfig,
    ) -> Result<Self, DensityError> {
        let log_weights = record
            .responses
            .iter()
            .enumerate()
            .map(|(index, sample)| {
                length_normalized_logprob(sample)
                    .map_err(|_| DensityError::EmptyTokens { index })
                    .and_then(|w| apply_temperature(w, cfg.temperature))
                    .map(|w| w.log_norm_prob)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            record,
            relations,
            log_weights,
            cfg: cfg.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.record.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.responses.is_empty()
    }

    /// Temperature-scaled log weight of each response.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    fn check_target(&self, target: usize) -> Result<(), DensityError> {
        if target >= self.len() {
            return Err(DensityError::TargetOutOfRange {
                target,
                len: self.len(),
            });
        }
        Ok(())
    }

    fn kernels(&self, target: usize, refs: &[usize]) -> Result<Vec<f64>, DensityError> {
        refs.iter()
            .map(|&i| {
                if i >= self.len() {
                    return Err(DensityError::ReferenceOutOfRange {
                        index: i,
                        len: self.len(),
                    });
                }
                self.relations
                    .kernel(target, i)
                    .ok_or(DensityError::MissingRelation { i: target, j: i })
            })
            .collect()
    }

    fn default_references(&self, target: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.cfg.use_target_as_reference || i != target)
            .collect()
    }

    /// Semantic density of `target` against all unique responses of the record.
    pub fn semantic_density(&self, target: usize) -> Result<f64, DensityError> {
        self.check_target(target)?;
        let refs = self.default_references(target);
        self.density_over(target, &refs)
    }

    /// Semantic density against an explicit reference subset.
    ///
    /// The target itself is dropped from `refs` when the configuration says
    /// not to use it as a reference.
    pub fn semantic_density_with_references(&self, target: usize, refs: &[usize]) -> Result<f64, DensityError> {
        self.check_target(target)?;
        if self.cfg.use_target_as_reference {
            self.density_over(target, refs)
        } else {
            let refs: Vec<usize> = refs.iter().copied().filter(|&i| i != target).collect();
            self.density_over(target, &refs)
        }
    }

    fn density_over(&self, target: usize, refs: &[usize]) -> Result<f64, DensityError> {
        if refs.is_empty() {
            return Err(DensityError::ZeroReferences);
        }
        if refs.len() < self.cfg.min_references {
            return Err(DensityError::TooFewReferences {
                have: refs.len(),
                need: self.cfg.min_references,
            });
        }
        let kernels = self.kernels(target, refs)?;
        let log_weights: Vec<f64> = refs.iter().map(|&i| self.log_weights[i]).collect();
        weighted_kernel_mean(&log_weights, &kernels)
    }

    /// Frequency-weighted variant: weights are occurrence counts, not probabilities.
    pub fn frequency_density(&self, target: usize) -> Result<f64, DensityError> {
        self.check_target(target)?;
        let refs: Vec<usize> = (0..self.len()).collect();
        let kernels = self.kernels(target, &refs)?;
        let counts: Vec<u32> = self.record.responses.iter().map(|r| r.count).collect();
        count_weighted_kernel_mean(&counts, &kernels)
    }
}

/// Semantic density of one response of a deduplicated record.
pub fn semantic_density(target: usize, record: &GenerationRecord, cfg: &DensityConfig) -> Result<f64, DensityError> {
    let relations = RelationMatrix::from_record(record);
    DensityEstimator::new(record, &relations, cfg)?.semantic_density(target)
}

/// Count-weighted density of one response of a deduplicated record.
pub fn frequency_density(target: usize, record: &GenerationRecord) -> Result<f64, DensityError> {
    let relations = RelationMatrix::from_record(record);
    DensityEstimator::new(record, &relations, &DensityConfig::default())?.frequency_density(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{DirectedRelation, RelationProbs};

    fn record_with(samples: Vec<ResponseSample>, rel: impl Fn(usize, usize) -> RelationProbs) -> GenerationRecord {
        let m = samples.len();
        let mut relations = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    relations.push(DirectedRelation::new(i, j, rel(i, j)));
                }
            }
        }
        GenerationRecord {
            prompt_id: "p".into(),
            prompt: "x".into(),
            model: "m".into(),
            dataset: "d".into(),
            gold_answers: vec!["g".into()],
            responses: samples,
            relations,
            single_direction: false,
        }
    }

    #[test]
    fn length_normalization() {
        let w = length_normalized_logprob(&ResponseSample::new("a", vec![-0.5, -0.5, -0.5, -0.5])).unwrap();
        assert_eq!(w.log_norm_prob, -0.5);
        assert!((w.prob() - 0.606_530_659_712_633_4).abs() < 1e-12);

        let w = length_normalized_logprob(&ResponseSample::new("a", vec![0.0; 3])).unwrap();
        assert_eq!(w.prob(), 1.0);

        let w = length_normalized_logprob(&ResponseSample::new("a", vec![-2.0])).unwrap();
        assert_eq!(w.log_norm_prob, -2.0);
        assert!((w.prob() - 0.135_335_283_236_612_7).abs() < 1e-12);

        assert!(matches!(
            length_normalized_logprob(&ResponseSample::new("a", vec![])),
            Err(DensityError::EmptyTokens { .. })
        ));
    }

    #[test]
    fn temperature_scaling() {
        let half = SequenceWeight {
            log_norm_prob: 0.5f64.ln(),
            temperature_applied: 1.0,
        };
        assert!((apply_temperature(half, 0.5).unwrap().prob() - 0.25).abs() < 1e-15);
        assert_eq!(apply_temperature(half, 1.0).unwrap(), half);
        let one = SequenceWeight {
            log_norm_prob: 0.0,
            temperature_applied: 1.0,
        };
        assert_eq!(apply_temperature(one, 0.1).unwrap().prob(), 1.0);
        assert_eq!(apply_temperature(one, 0.1).unwrap().temperature_applied, 0.1);
        assert!(apply_temperature(one, 0.0).is_err());
        assert!(apply_temperature(one, -1.0).is_err());
    }

    #[test]
    fn all_equivalent_or_all_contradictory() {
        let samples = || {
            vec![
                ResponseSample::new("a", vec![-0.1]),
                ResponseSample::new("b", vec![-0.7, -0.2]),
                ResponseSample::new("c", vec![-1.3]),
            ]
        };
        let cfg = DensityConfig::default();
        let rec = record_with(samples(), |_, _| RelationProbs::entailment());
        for t in 0..3 {
            assert_eq!(semantic_density(t, &rec, &cfg).unwrap(), 1.0);
        }
        let rec = record_with(samples(), |_, _| RelationProbs::contradiction());
        let cfg = DensityConfig {
            use_target_as_reference: false,
            ..cfg
        };
        for t in 0..3 {
            assert_eq!(semantic_density(t, &rec, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_reference_hand_example() {
        // weights (0.6, 0.2), kernels (1.0, 0.25)
        let samples = vec![
            ResponseSample::new("a", vec![0.6f64.ln()]),
            ResponseSample::new("b", vec![0.2f64.ln()]),
        ];
        let rec = record_with(samples, |_, _| RelationProbs::new(0.5, 0.5, 0.0));
        let cfg = DensityConfig::default().with_temperature(1.0);
        let sd = semantic_density(0, &rec, &cfg).unwrap();
        assert!((sd - 0.8125).abs() < 1e-12, "{sd}");
    }

    #[test]
    fn frequency_hand_example() {
        let samples = vec![
            ResponseSample::new("a", vec![-1.0]).with_count(3),
            ResponseSample::new("b", vec![-1.0]),
        ];
        let rec = record_with(samples, |_, _| RelationProbs::neutral());
        assert!((frequency_density(0, &rec).unwrap() - 0.875).abs() < 1e-12);

        let single = record_with(vec![ResponseSample::new("a", vec![-1.0])], |_, _| {
            RelationProbs::neutral()
        });
        assert_eq!(frequency_density(0, &single).unwrap(), 1.0);
    }

    #[test]
    fn underflowing_weights_are_stable() {
        let lw = [-5000.0, -5001.0];
        let sd = weighted_kernel_mean(&lw, &[1.0, 0.0]).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((sd - expected).abs() < 1e-12);
    }

    #[test]
    fn reference_errors() {
        let rec = record_with(vec![ResponseSample::new("a", vec![-1.0])], |_, _| {
            RelationProbs::neutral()
        });
        let cfg = DensityConfig {
            use_target_as_reference: false,
            ..DensityConfig::default()
        };
        assert_eq!(semantic_density(0, &rec, &cfg), Err(DensityError::ZeroReferences));
        let cfg = DensityConfig {
            min_references: 2,
            ..DensityConfig::default()
        };
        assert_eq!(
            semantic_density(0, &rec, &cfg),
            Err(DensityError::TooFewReferences { have: 1, need: 2 })
        );
        assert!(matches!(
            semantic_density(3, &rec, &DensityConfig::default()),
            Err(DensityError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn missing_relation_is_reported() {
        let mut rec = record_with(
            vec![
                ResponseSample::new("a", vec![-1.0]),
                ResponseSample::new("b", vec![-1.0]),
            ],
            |_, _| RelationProbs::neutral(),
        );
        rec.relations.clear();
        assert_eq!(
            semantic_density(0, &rec, &DensityConfig::default()),
            Err(DensityError::MissingRelation { i: 0, j: 1 })
        );
    }
}
