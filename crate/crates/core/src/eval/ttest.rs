//! Paired two-sided Student t-test over per-configuration metric values.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Pairing key: (model, dataset).
pub type ConfigKey = (String, String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Tests whether `a - b` has zero mean. Identical inputs give `t = 0, p = 1`;
/// a non-zero constant difference has no defined statistic and is an error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(EvalError::NonFiniteScore(*d));
    }
    let df = (n - 1) as f64;
    if diffs.iter().all(|&d| d == diffs[0]) {
        if diffs[0] == 0.0 {
            return Ok(PairedTTest {
                n,
                mean_diff: 0.0,
                sd_diff: 0.0,
                t: 0.0,
                df,
                p: 1.0,
            });
        }
        return Err(EvalError::ZeroVariance { diff: diffs[0] });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / df;
    let sd = var.sqrt();
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        p,
    })
}

/// Pairs the two metrics by configuration key; keys present on only one side are ignored.
pub fn paired_t_test_by_config(
    a: &BTreeMap<ConfigKey, f64>,
    b: &BTreeMap<ConfigKey, f64>,
) -> Result<PairedTTest, EvalError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a.iter().filter_map(|(k, &x)| b.get(k).map(|&y| (x, y))).unzip();
    paired_t_test(&xs, &ys)
}
