//! Comparison metrics computed from the same records: semantic entropy,
//! degree, and the likelihood/entropy family.
//!
//! Semantic entropy, length-normalized entropy and predictive entropy are
//! prompt-wise (one value shared by every response of a record). Degree and
//! normalized likelihood are response-wise.

use thiserror::Error;

use crate::geometry::RelationMatrix;
use crate::record::{GenerationRecord, ResponseSample};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("no relation recorded between responses {i} and {j}")]
    MissingRelation { i: usize, j: usize },
    #[error("target {target} out of range for {len} responses")]
    TargetOutOfRange { target: usize, len: usize },
}

/// One semantic-equivalence class of responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticCluster {
    pub member_indices: Vec<usize>,
    pub representative: usize,
}

fn equivalent(relations: &RelationMatrix, a: usize, b: usize) -> Result<bool, BaselineError> {
    let fwd = relations.directed(a, b);
    let bwd = relations.directed(b, a);
    if fwd.is_none() && bwd.is_none() {
        return Err(BaselineError::MissingRelation { i: a, j: b });
    }
    Ok([fwd, bwd].iter().flatten().all(|rel| rel.entailment_is_argmax()))
}

/// Greedy single pass in response order. A response joins the first cluster
/// whose representative it entails and is entailed by (entailment strictly the
/// argmax class in every recorded direction); otherwise it starts a new one.
pub fn cluster_with(relations: &RelationMatrix) -> Result<Vec<SemanticCluster>, BaselineError> {
    let mut clusters: Vec<SemanticCluster> = Vec::new();
    'responses: for idx in 0..relations.len() {
        for cluster in clusters.iter_mut() {
            if equivalent(relations, cluster.representative, idx)? {
                cluster.member_indices.push(idx);
                continue 'responses;
            }
        }
        clusters.push(SemanticCluster {
            member_indices: vec![idx],
            representative: idx,
        });
    }
    Ok(clusters)
}

pub fn cluster_by_equivalence(record: &GenerationRecord) -> Result<Vec<SemanticCluster>, BaselineError> {
    cluster_with(&RelationMatrix::from_record(record))
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn length_normalized_logprob(sample: &ResponseSample) -> f64 {
    sample.sequence_logprob() / sample.num_tokens.max(1) as f64
}

/// Entropy over clusters, where each cluster's mass is the normalized sum of
/// its members' length-normalized sequence probabilities.
pub fn semantic_entropy(record: &GenerationRecord, clusters: &[SemanticCluster]) -> f64 {
    let log_probs: Vec<f64> = record.responses.iter().map(length_normalized_logprob).collect();
    let log_total = log_sum_exp(log_probs.iter().copied());
    let entropy: f64 = clusters
        .iter()
        .map(|c| {
            let log_mass = log_sum_exp(c.member_indices.iter().map(|&i| log_probs[i])) - log_total;
            let mass = log_mass.exp();
            if mass > 0.0 {
                -mass * log_mass
            } else {
                0.0
            }
        })
        .sum();
    entropy.max(0.0)
}

/// Mean bidirectional entailment probability between the target and all
/// responses, counting the target's similarity to itself as 1.
pub fn degree_with(relations: &RelationMatrix, target: usize) -> Result<f64, BaselineError> {
    let m = relations.len();
    if target >= m {
        return Err(BaselineError::TargetOutOfRange { target, len: m });
    }
    let mut total = 0.0;
    for i in 0..m {
        let rel = relations
            .pair(target, i)
            .ok_or(BaselineError::MissingRelation { i: target, j: i })?;
        total += rel.p_entailment;
    }
    Ok(total / m as f64)
}

pub fn degree_confidence(target: usize, record: &GenerationRecord) -> Result<f64, BaselineError> {
    degree_with(&RelationMatrix::from_record(record), target)
}

/// Geometric-mean token probability of the response itself.
pub fn normalized_likelihood(sample: &ResponseSample) -> f64 {
    length_normalized_logprob(sample).exp()
}

/// `-(1/M) * sum_i log p(y_i|x) / L_i`.
pub fn length_normalized_entropy(record: &GenerationRecord) -> f64 {
    let m = record.responses.len() as f64;
    -record.responses.iter().map(length_normalized_logprob).sum::<f64>() / m
}

/// `-(1/M) * sum_i log p(y_i|x)`.
pub fn predictive_entropy(record: &GenerationRecord) -> f64 {
    let m = record.responses.len() as f64;
    -record
        .responses
        .iter()
        .map(ResponseSample::sequence_logprob)
        .sum::<f64>()
        / m
}
