//! Confidence scoring for free-form language-model outputs.
//!
//! A response's *semantic density* is a probability-weighted kernel density
//! estimate of that response among reference responses sampled for the same
//! prompt, where distances come from NLI class probabilities. This crate
//! scores records produced by an external adapter, computes the usual
//! baselines next to it, and evaluates all of them against Rouge-L
//! correctness labels.
//!
//! ```
//! use semdensity::density::{semantic_density, DensityConfig};
//! use semdensity::record::{DirectedRelation, GenerationRecord, RelationProbs, ResponseSample};
//!
//! let record = GenerationRecord {
//!     prompt_id: "q1".into(),
//!     prompt: "Capital of France?".into(),
//!     model: "m".into(),
//!     dataset: "d".into(),
//!     gold_answers: vec!["Paris".into()],
//!     responses: vec![
//!         ResponseSample::new("Paris", vec![-0.1]),
//!         ResponseSample::new("Lyon", vec![-2.0]),
//!     ],
//!     relations: vec![
//!         DirectedRelation::new(0, 1, RelationProbs::contradiction()),
//!         DirectedRelation::new(1, 0, RelationProbs::contradiction()),
//!     ],
//!     single_direction: false,
//! };
//! let sd = semantic_density(0, &record, &DensityConfig::default()).unwrap();
//! assert!(sd > 0.99);
//! ```

pub mod baselines;
pub mod density;
pub mod eval;
pub mod geometry;
pub mod par;
pub mod pipeline;
pub mod record;
pub mod score;
pub mod synth;

pub use density::{DensityConfig, DensityEstimator};
pub use par::Execution;
pub use record::{GenerationRecord, RelationProbs, ResponseSample};
pub use score::{Metric, ScoreConfig, ScoreSet};
