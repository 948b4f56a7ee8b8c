use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semdensity::density::{weighted_kernel_mean, DensityConfig, DensityEstimator};
use semdensity::eval::{aupr_average, auroc, LabeledScore, Polarity};
use semdensity::geometry::RelationMatrix;
use semdensity::record::{dedup_responses, parse_record, GenerationRecord};
use semdensity::synth::random_record;

/// Counts ordered (correct, incorrect) pairs directly.
fn brute_force_auroc(items: &[(f64, bool)]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for &(sc, _) in items.iter().filter(|i| i.1) {
        for &(si, _) in items.iter().filter(|i| !i.1) {
            pairs += 1.0;
            if sc > si {
                credit += 1.0;
            } else if sc == si {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

fn record_strategy() -> impl Strategy<Value = GenerationRecord> {
    (any::<u64>(), 1usize..8).prop_map(|(seed, m)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_record(&mut rng, (seed % 1000) as usize, m)
    })
}

/// Random record where some responses repeat the same text.
fn record_with_duplicates() -> impl Strategy<Value = GenerationRecord> {
    (record_strategy(), proptest::collection::vec(0usize..3, 8)).prop_map(|(mut rec, picks)| {
        for (sample, pick) in rec.responses.iter_mut().zip(picks) {
            sample.text = match pick {
                0 => "alpha".into(),
                1 => " alpha ".into(),
                _ => sample.text.clone(),
            };
        }
        rec
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_then_parse_is_identity(rec in record_strategy()) {
        let back = parse_record(rec.to_json_line().as_bytes(), 1).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn dedup_is_idempotent_and_keeps_counts(rec in record_with_duplicates()) {
        let once = dedup_responses(&rec);
        prop_assert_eq!(dedup_responses(&once), once.clone());
        let before: u32 = rec.responses.iter().map(|r| r.count).sum();
        let after: u32 = once.responses.iter().map(|r| r.count).sum();
        prop_assert_eq!(before, after);
        once.validate().unwrap();
    }

    #[test]
    fn density_is_a_weighted_mean_of_kernels(rec in record_strategy(), t in 0.05f64..2.0) {
        let rel = RelationMatrix::from_record(&rec);
        let cfg = DensityConfig::default().with_temperature(t);
        let est = DensityEstimator::new(&rec, &rel, &cfg).unwrap();
        for target in 0..rec.responses.len() {
            let ks: Vec<f64> = (0..rec.responses.len()).map(|i| rel.kernel(target, i).unwrap()).collect();
            let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sd = est.semantic_density(target).unwrap();
            prop_assert!((0.0..=1.0).contains(&sd));
            prop_assert!(sd >= lo - 1e-12 && sd <= hi + 1e-12);
            let fd = est.frequency_density(target).unwrap();
            prop_assert!((0.0..=1.0).contains(&fd));
        }
    }

    #[test]
    fn weighted_mean_is_permutation_and_scale_invariant(
        pairs in proptest::collection::vec((-30.0f64..0.0, 0.0f64..1.0), 1..12),
        shift in -50.0f64..50.0,
        rotate in 0usize..12,
    ) {
        let (lw, ks): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let base = weighted_kernel_mean(&lw, &ks).unwrap();

        let mut rotated = pairs.clone();
        let len = rotated.len();
        rotated.rotate_left(rotate % len);
        let (rlw, rks): (Vec<f64>, Vec<f64>) = rotated.into_iter().unzip();
        prop_assert!((weighted_kernel_mean(&rlw, &rks).unwrap() - base).abs() < 1e-12);

        let scaled: Vec<f64> = lw.iter().map(|l| l + shift).collect();
        prop_assert!((weighted_kernel_mean(&scaled, &ks).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn raising_one_kernel_never_lowers_density(
        pairs in proptest::collection::vec((-10.0f64..0.0, 0.0f64..0.9), 1..10),
        which in 0usize..10,
        bump in 0.01f64..0.1,
    ) {
        let (lw, mut ks): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let before = weighted_kernel_mean(&lw, &ks).unwrap();
        let idx = which % ks.len();
        ks[idx] += bump;
        let after = weighted_kernel_mean(&lw, &ks).unwrap();
        prop_assert!(after > before);
    }

    #[test]
    fn auroc_matches_pair_counting(
        items in proptest::collection::vec((0u8..20, any::<bool>()), 2..300)
    ) {
        let items: Vec<(f64, bool)> = items.into_iter().map(|(s, c)| (f64::from(s) / 4.0, c)).collect();
        prop_assume!(items.iter().any(|i| i.1) && items.iter().any(|i| !i.1));
        let conf: Vec<LabeledScore> = items.iter().map(|&(s, c)| LabeledScore::new(s, c, Polarity::Confidence)).collect();
        let a = auroc(&conf).unwrap();
        prop_assert!((a - brute_force_auroc(&items)).abs() < 1e-12);

        let unc: Vec<LabeledScore> = conf.iter().map(|s| LabeledScore::new(s.score, s.correct, Polarity::Uncertainty)).collect();
        prop_assert_eq!(auroc(&unc).unwrap(), 1.0 - a);

        // strictly monotone transform
        let warped: Vec<LabeledScore> = conf.iter().map(|s| LabeledScore::new((3.0 * s.score).exp() - 7.0, s.correct, s.polarity)).collect();
        prop_assert_eq!(auroc(&warped).unwrap(), a);
        prop_assert_eq!(aupr_average(&warped).unwrap(), aupr_average(&conf).unwrap());
    }
}
