//! Seeded synthetic corpora for benchmarks, property checks and fixtures.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::record::{DirectedRelation, GenerationRecord, RelationProbs, ResponseSample};

fn jitter<R: Rng>(rng: &mut R, dominant: usize, strength: f64) -> RelationProbs {
    let mut p = [0.0; 3];
    for v in p.iter_mut() {
        *v = rng.gen_range(0.0..(1.0 - strength));
    }
    p[dominant] += strength;
    let sum: f64 = p.iter().sum();
    RelationProbs::new(p[0] / sum, p[1] / sum, p[2] / sum)
}

/// A point drawn from the probability simplex, occasionally at a vertex.
pub fn random_relation<R: Rng>(rng: &mut R) -> RelationProbs {
    match rng.gen_range(0..10) {
        0 => RelationProbs::entailment(),
        1 => RelationProbs::contradiction(),
        2 => RelationProbs::neutral(),
        _ => {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let c: f64 = rng.gen_range(1e-3..1.0);
            let s = a + b + c;
            RelationProbs::new(a / s, b / s, c / s)
        }
    }
}

fn all_pairs(m: usize, mut rel: impl FnMut(usize, usize) -> RelationProbs) -> Vec<DirectedRelation> {
    let mut out = Vec::with_capacity(m * m.saturating_sub(1));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                out.push(DirectedRelation::new(i, j, rel(i, j)));
            }
        }
    }
    out
}

/// Record with `m` distinct responses and random probabilities and relations.
pub fn random_record<R: Rng>(rng: &mut R, id: usize, m: usize) -> GenerationRecord {
    let responses = (0..m)
        .map(|i| {
            let len = rng.gen_range(1..=8);
            let logprobs = (0..len).map(|_| -rng.gen_range(0.0..3.0)).collect();
            ResponseSample::new(format!("response {id} {i}"), logprobs)
                .with_beam_group(i as u32)
                .with_count(rng.gen_range(1..=3))
        })
        .collect();
    GenerationRecord {
        prompt_id: format!("q{id}"),
        prompt: format!("question {id}"),
        model: "synthetic".into(),
        dataset: "random".into(),
        gold_answers: vec![format!("response {id} 0")],
        responses,
        relations: all_pairs(m, |_, _| random_relation(rng)),
        single_direction: false,
    }
}

/// `n` random records with `m` responses each.
pub fn random_corpus(n: usize, m: usize, seed: u64) -> Vec<GenerationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|id| random_record(&mut rng, id, m)).collect()
}

const CORRECT_TEMPLATES: [&str; 8] = [
    "{}",
    "it is {}",
    "{} indeed",
    "the {}",
    "{} for sure",
    "surely {}",
    "{} i think",
    "probably {}",
];

/// Corpus whose correct responses are probable and mutually entailing while
/// incorrect ones are improbable and contradict everything. Correct responses
/// occupy the leading beam groups; every record has both classes.
pub fn planted_corpus(n: usize, m: usize, seed: u64) -> Vec<GenerationRecord> {
    assert!(m >= 4, "planted corpus needs at least 4 responses per record");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let answer = format!("answer{id}");
            let n_correct = rng.gen_range(2..=(m - 2).min(CORRECT_TEMPLATES.len()));
            let responses: Vec<ResponseSample> = (0..m)
                .map(|i| {
                    let (text, lo, hi) = if i < n_correct {
                        (CORRECT_TEMPLATES[i].replace("{}", &answer), 0.02, 0.3)
                    } else {
                        (format!("guess{id}x{i}"), 1.5, 3.0)
                    };
                    let len = rng.gen_range(1..=4);
                    let logprobs = (0..len).map(|_| -rng.gen_range(lo..hi)).collect();
                    ResponseSample::new(text, logprobs).with_beam_group(i as u32)
                })
                .collect();
            let relations = all_pairs(m, |i, j| {
                if i < n_correct && j < n_correct {
                    jitter(&mut rng, 2, 0.85)
                } else {
                    jitter(&mut rng, 0, 0.85)
                }
            });
            GenerationRecord {
                prompt_id: format!("planted{id}"),
                prompt: format!("What is item {id}?"),
                model: "planted-model".into(),
                dataset: "planted".into(),
                gold_answers: vec![answer],
                responses,
                relations,
                single_direction: false,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_records_are_valid() {
        for r in random_corpus(50, 6, 1).iter().chain(planted_corpus(20, 10, 2).iter()) {
            r.validate().unwrap();
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        assert_eq!(random_corpus(5, 4, 9), random_corpus(5, 4, 9));
        assert_ne!(random_corpus(5, 4, 9), random_corpus(5, 4, 10));
    }
}
