//! Semantic distances derived from NLI class probabilities.
//!
//! The semantic space is never materialized. An entailed pair sits at
//! distance 0, a neutral pair at `sqrt(2)/2` and a contradictory pair at 1,
//! so the expected squared distance under the NLI distribution is
//! `p_contradiction + p_neutral / 2`.

use crate::record::{GenerationRecord, RelationProbs};

/// Expected squared distance between two responses, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DistanceExpectation(f64);

impl DistanceExpectation {
    /// Clamps to `[0, 1]`; values outside only arise from rounding.
    pub fn new(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl RelationProbs {
    /// Rescales the triple onto the probability simplex.
    pub fn normalized(&self) -> RelationProbs {
        let sum = self.sum();
        if sum == 1.0 || sum <= 0.0 {
            return *self;
        }
        RelationProbs::new(
            self.p_contradiction / sum,
            self.p_neutral / sum,
            self.p_entailment / sum,
        )
    }

    /// True when entailment is strictly the most probable class.
    pub fn entailment_is_argmax(&self) -> bool {
        self.p_entailment > self.p_contradiction && self.p_entailment > self.p_neutral
    }
}

/// Component-wise mean of the two directions of a pair.
pub fn bidirectional_average(ab: &RelationProbs, ba: &RelationProbs) -> RelationProbs {
    RelationProbs::new(
        0.5 * (ab.p_contradiction + ba.p_contradiction),
        0.5 * (ab.p_neutral + ba.p_neutral),
        0.5 * (ab.p_entailment + ba.p_entailment),
    )
}

/// `p_contradiction + p_neutral / 2` of the simplex-normalized triple.
pub fn raw_sq_distance(rel: &RelationProbs) -> f64 {
    let rel = rel.normalized();
    rel.p_contradiction + 0.5 * rel.p_neutral
}

pub fn expected_sq_distance(rel: &RelationProbs) -> DistanceExpectation {
    DistanceExpectation::new(raw_sq_distance(rel))
}

/// Dimension-free Epanechnikov kernel: `(1 - d2)` inside the unit ball, 0 outside.
pub fn kernel(d2: DistanceExpectation) -> f64 {
    let d2 = d2.value();
    if d2 <= 1.0 {
        1.0 - d2
    } else {
        0.0
    }
}

/// Kernel value for a pair of responses given their (averaged) NLI output.
pub fn relation_kernel(rel: &RelationProbs) -> f64 {
    kernel(expected_sq_distance(rel))
}

/// Dense lookup of the directed relations of one record.
#[derive(Debug, Clone)]
pub struct RelationMatrix {
    m: usize,
    directed: Vec<Option<RelationProbs>>,
}

impl RelationMatrix {
    pub fn from_record(record: &GenerationRecord) -> Self {
        let m = record.responses.len();
        let mut directed = vec![None; m * m];
        for rel in &record.relations {
            if rel.i < m && rel.j < m {
                directed[rel.i * m + rel.j] = Some(rel.probs.normalized());
            }
        }
        Self { m, directed }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Raw NLI output for `i -> j`.
    pub fn directed(&self, i: usize, j: usize) -> Option<RelationProbs> {
        self.directed[i * self.m + j]
    }

    /// Bidirectionally averaged relation, or the single recorded direction.
    /// Self-pairs are entailment by definition.
    pub fn pair(&self, i: usize, j: usize) -> Option<RelationProbs> {
        if i == j {
            return Some(RelationProbs::entailment());
        }
        match (self.directed(i, j), self.directed(j, i)) {
            (Some(ab), Some(ba)) => Some(bidirectional_average(&ab, &ba)),
            (Some(one), None) | (None, Some(one)) => Some(one),
            (None, None) => None,
        }
    }

    /// Kernel between two responses; exactly 1 for `i == j`.
    pub fn kernel(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(1.0);
        }
        self.pair(i, j).map(|rel| relation_kernel(&rel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn simplex() -> impl Strategy<Value = RelationProbs> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_filter("non-degenerate", |(a, b, c)| a + b + c > 1e-9)
            .prop_map(|(a, b, c)| {
                let s = a + b + c;
                RelationProbs::new(a / s, b / s, c / s)
            })
    }

    #[test]
    fn averages_componentwise() {
        let avg = bidirectional_average(&RelationProbs::new(0.2, 0.3, 0.5), &RelationProbs::new(0.4, 0.1, 0.5));
        assert!(close(avg.p_contradiction, 0.3));
        assert!(close(avg.p_neutral, 0.2));
        assert!(close(avg.p_entailment, 0.5));

        let p = RelationProbs::new(0.1, 0.6, 0.3);
        assert_eq!(bidirectional_average(&p, &p), p);
    }

    #[test]
    fn distance_of_extreme_relations() {
        assert_eq!(expected_sq_distance(&RelationProbs::entailment()).value(), 0.0);
        assert_eq!(expected_sq_distance(&RelationProbs::contradiction()).value(), 1.0);
        assert_eq!(expected_sq_distance(&RelationProbs::neutral()).value(), 0.5);
        assert!(close(
            expected_sq_distance(&RelationProbs::new(0.2, 0.4, 0.4)).value(),
            0.4
        ));
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(DistanceExpectation::new(0.0)), 1.0);
        assert_eq!(kernel(DistanceExpectation::new(0.5)), 0.5);
        assert_eq!(kernel(DistanceExpectation::new(1.0)), 0.0);
        assert_eq!(kernel(DistanceExpectation::new(1.0 + 1e-15)), 0.0);
        assert_eq!(kernel(DistanceExpectation::new(-1e-15)), 1.0);
    }

    #[test]
    fn single_direction_pair_is_identity() {
        let rec = GenerationRecord {
            prompt_id: "p".into(),
            prompt: String::new(),
            model: String::new(),
            dataset: String::new(),
            gold_answers: vec!["a".into()],
            responses: vec![
                crate::record::ResponseSample::new("a", vec![-1.0]),
                crate::record::ResponseSample::new("b", vec![-1.0]),
            ],
            relations: vec![crate::record::DirectedRelation::new(
                1,
                0,
                RelationProbs::new(0.1, 0.2, 0.7),
            )],
            single_direction: true,
        };
        let m = RelationMatrix::from_record(&rec);
        assert_eq!(m.pair(0, 1), Some(RelationProbs::new(0.1, 0.2, 0.7)));
        assert_eq!(m.kernel(1, 1), Some(1.0));
    }

    proptest! {
        #[test]
        fn raw_distance_never_needs_clamping(rel in simplex()) {
            let raw = raw_sq_distance(&rel);
            prop_assert!((0.0..=1.0).contains(&raw));
            prop_assert_eq!(relation_kernel(&rel), 1.0 - raw);
        }

        #[test]
        fn moving_neutral_to_contradiction_lowers_kernel(
            rel in simplex(), frac in 0.01f64..1.0
        ) {
            prop_assume!(rel.p_neutral > 1e-6);
            let shift = rel.p_neutral * frac;
            let moved = RelationProbs::new(
                rel.p_contradiction + shift,
                rel.p_neutral - shift,
                rel.p_entailment,
            );
            prop_assert!(raw_sq_distance(&moved) > raw_sq_distance(&rel));
            prop_assert!(relation_kernel(&moved) < relation_kernel(&rel));
        }

        #[test]
        fn averaged_distance_is_order_free(a in simplex(), b in simplex()) {
            let ab = expected_sq_distance(&bidirectional_average(&a, &b));
            let ba = expected_sq_distance(&bidirectional_average(&b, &a));
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn kernel_is_one_lipschitz(x in -0.5f64..1.5, y in -0.5f64..1.5) {
            let kx = kernel(DistanceExpectation::new(x));
            let ky = kernel(DistanceExpectation::new(y));
            prop_assert!((kx - ky).abs() <= (x - y).abs() + 1e-15);
        }
    }
}
