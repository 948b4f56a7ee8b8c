//! Per-response score sets: every confidence and uncertainty metric for each
//! unique response of a record, plus its correctness label.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, BaselineError};
use crate::density::{DensityConfig, DensityError, DensityEstimator};
use crate::eval::ranking::Polarity;
use crate::eval::rouge::{best_rouge, is_correct, Tokenizer, Trimmer, WhitespaceTokenizer, DEFAULT_ROUGE_THRESHOLD};
use crate::geometry::RelationMatrix;
use crate::record::{dedup_responses, GenerationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    SemanticDensity,
    FrequencyDensity,
    SemanticEntropy,
    Degree,
    NormalizedLikelihood,
    LengthNormalizedEntropy,
    PredictiveEntropy,
    PTrue,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::SemanticDensity,
        Metric::FrequencyDensity,
        Metric::SemanticEntropy,
        Metric::Degree,
        Metric::NormalizedLikelihood,
        Metric::LengthNormalizedEntropy,
        Metric::PredictiveEntropy,
        Metric::PTrue,
    ];

    /// Metrics computed from a record alone (P(True) comes from the adapter).
    pub const DEFAULT: [Metric; 7] = [
        Metric::SemanticDensity,
        Metric::FrequencyDensity,
        Metric::SemanticEntropy,
        Metric::Degree,
        Metric::NormalizedLikelihood,
        Metric::LengthNormalizedEntropy,
        Metric::PredictiveEntropy,
    ];

    /// Column header used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Metric::SemanticDensity => "SD",
            Metric::FrequencyDensity => "FD",
            Metric::SemanticEntropy => "SE",
            Metric::Degree => "Deg",
            Metric::NormalizedLikelihood => "NL",
            Metric::LengthNormalizedEntropy => "NE",
            Metric::PredictiveEntropy => "PE",
            Metric::PTrue => "PTrue",
        }
    }

    /// Field name in score JSONL.
    pub fn field(self) -> &'static str {
        match self {
            Metric::SemanticDensity => "semantic_density",
            Metric::FrequencyDensity => "frequency_density",
            Metric::SemanticEntropy => "semantic_entropy",
            Metric::Degree => "degree",
            Metric::NormalizedLikelihood => "normalized_likelihood",
            Metric::LengthNormalizedEntropy => "length_normalized_entropy",
            Metric::PredictiveEntropy => "predictive_entropy",
            Metric::PTrue => "p_true",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Metric::SemanticEntropy | Metric::LengthNormalizedEntropy | Metric::PredictiveEntropy => {
                Polarity::Uncertainty
            }
            _ => Polarity::Confidence,
        }
    }

    /// One value per prompt rather than per response.
    pub fn is_prompt_wise(self) -> bool {
        matches!(
            self,
            Metric::SemanticEntropy | Metric::LengthNormalizedEntropy | Metric::PredictiveEntropy
        )
    }

    pub fn value(self, s: &ScoreSet) -> Option<f64> {
        match self {
            Metric::SemanticDensity => s.semantic_density,
            Metric::FrequencyDensity => s.frequency_density,
            Metric::SemanticEntropy => s.semantic_entropy,
            Metric::Degree => s.degree,
            Metric::NormalizedLikelihood => s.normalized_likelihood,
            Metric::LengthNormalizedEntropy => s.length_normalized_entropy,
            Metric::PredictiveEntropy => s.predictive_entropy,
            Metric::PTrue => s.p_true,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown metric `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.label().to_ascii_lowercase() == key || m.field() == key)
            .ok_or_else(|| UnknownMetric(s.trim().to_string()))
    }
}

/// One output line of `score`. Unselected or unavailable metrics are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub prompt_id: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub dataset: String,
    pub response_index: usize,
    #[serde(default)]
    pub beam_group: u32,
    #[serde(default)]
    pub count: u32,
    #[serde(default)]
    pub semantic_density: Option<f64>,
    #[serde(default)]
    pub frequency_density: Option<f64>,
    #[serde(default)]
    pub semantic_entropy: Option<f64>,
    #[serde(default)]
    pub degree: Option<f64>,
    #[serde(default)]
    pub normalized_likelihood: Option<f64>,
    #[serde(default)]
    pub length_normalized_entropy: Option<f64>,
    #[serde(default)]
    pub predictive_entropy: Option<f64>,
    #[serde(default)]
    pub p_true: Option<f64>,
    #[serde(default)]
    pub correct: Option<bool>,
    #[serde(default)]
    pub rouge_l: Option<f64>,
}

impl ScoreSet {
    /// Correctness at `threshold`, recomputed from Rouge-L when it was recorded.
    pub fn label_at(&self, threshold: f64) -> Option<bool> {
        self.rouge_l.map(|r| is_correct(r, threshold)).or(self.correct)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("score sets always serialize")
    }
}

#[derive(Clone)]
pub struct ScoreConfig {
    pub density: DensityConfig,
    pub rouge_threshold: f64,
    pub trimmer: Trimmer,
    pub tokenizer: Arc<dyn Tokenizer>,
    pub metrics: Vec<Metric>,
}

impl fmt::Debug for ScoreConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreConfig")
            .field("density", &self.density)
            .field("rouge_threshold", &self.rouge_threshold)
            .field("trimmer", &self.trimmer)
            .field("metrics", &self.metrics)
            .finish_non_exhaustive()
    }
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            density: DensityConfig::default(),
            rouge_threshold: DEFAULT_ROUGE_THRESHOLD,
            trimmer: Trimmer::default(),
            tokenizer: Arc::new(WhitespaceTokenizer),
            metrics: Metric::ALL.to_vec(),
        }
    }
}

impl ScoreConfig {
    pub fn wants(&self, metric: Metric) -> bool {
        self.metrics.contains(&metric)
    }

    /// Best Rouge-L of a response against the record's gold answers.
    pub fn rouge(&self, text: &str, gold_answers: &[String]) -> f64 {
        best_rouge(text, gold_answers, &self.trimmer, self.tokenizer.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Deduplicates the record and scores each unique response.
pub fn score_record(record: &GenerationRecord, cfg: &ScoreConfig) -> Result<Vec<ScoreSet>, ScoreError> {
    let record = dedup_responses(record);
    score_deduplicated(&record, cfg)
}

/// Scores a record whose responses are already unique.
pub fn score_deduplicated(record: &GenerationRecord, cfg: &ScoreConfig) -> Result<Vec<ScoreSet>, ScoreError> {
    let relations = RelationMatrix::from_record(record);
    let estimator = DensityEstimator::new(record, &relations, &cfg.density)?;

    let semantic_entropy = if cfg.wants(Metric::SemanticEntropy) {
        let clusters = baselines::cluster_with(&relations)?;
        Some(baselines::semantic_entropy(record, &clusters))
    } else {
        None
    };
    let ne = cfg
        .wants(Metric::LengthNormalizedEntropy)
        .then(|| baselines::length_normalized_entropy(record));
    let pe = cfg
        .wants(Metric::PredictiveEntropy)
        .then(|| baselines::predictive_entropy(record));

    record
        .responses
        .iter()
        .enumerate()
        .map(|(idx, sample)| {
            let rouge = cfg.rouge(&sample.text, &record.gold_answers);
            Ok(ScoreSet {
                prompt_id: record.prompt_id.clone(),
                model: record.model.clone(),
                dataset: record.dataset.clone(),
                response_index: idx,
                beam_group: sample.beam_group,
                count: sample.count,
                semantic_density: cfg
                    .wants(Metric::SemanticDensity)
                    .then(|| estimator.semantic_density(idx))
                    .transpose()?,
                frequency_density: cfg
                    .wants(Metric::FrequencyDensity)
                    .then(|| estimator.frequency_density(idx))
                    .transpose()?,
                semantic_entropy,
                degree: cfg
                    .wants(Metric::Degree)
                    .then(|| baselines::degree_with(&relations, idx))
                    .transpose()?,
                normalized_likelihood: cfg
                    .wants(Metric::NormalizedLikelihood)
                    .then(|| baselines::normalized_likelihood(sample)),
                length_normalized_entropy: ne,
                predictive_entropy: pe,
                p_true: if cfg.wants(Metric::PTrue) { sample.p_true } else { None },
                correct: Some(is_correct(rouge, cfg.rouge_threshold)),
                rouge_l: Some(rouge),
            })
        })
        .collect()
}
