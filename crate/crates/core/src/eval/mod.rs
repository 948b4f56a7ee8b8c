//! Evaluation protocol: correctness labels, rank statistics, robustness
//! studies, significance tests and report tables.

pub mod ranking;
pub mod report;
pub mod rouge;
pub mod studies;
pub mod ttest;

use thiserror::Error;

use crate::score::ScoreError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("undefined for a single class ({correct} correct, {incorrect} incorrect)")]
    SingleClass { correct: usize, incorrect: usize },
    #[error("scores mix confidence and uncertainty polarity")]
    MixedPolarity,
    #[error("non-finite value {0}")]
    NonFiniteScore(f64),
    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 paired configurations, got {0}")]
    TooFewPairs(usize),
    #[error("differences are constant ({diff}); t statistic undefined")]
    ZeroVariance { diff: f64 },
    #[error(transparent)]
    Scoring(#[from] ScoreError),
}

pub use ranking::{aupr_average, auroc, LabeledScore, Polarity};
pub use rouge::{correctness, rouge_l, Tokenizer, Trimmer, WhitespaceTokenizer};
pub use studies::{ablate_reference_count, ablation_curve, per_group_auroc, rouge_threshold_sweep};
pub use ttest::{paired_t_test, PairedTTest};
