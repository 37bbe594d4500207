//! Reconstruction metrics and the aggregation helpers used for reporting
//! medians with quartile bars.

use crate::error::{BenchError, Result};

/// Support-mask threshold used throughout the experiments.
pub const F1_THRESHOLD: f64 = 0.05;

/// Relative mean squared error `||est - truth||^2 / ||truth||^2`.
pub fn rmse(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(BenchError::InvalidInput(format!(
            "rmse: lengths {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    let denom: f64 = truth.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(BenchError::InvalidInput(
            "rmse undefined for an all-zero truth".into(),
        ));
    }
    let num: f64 = est
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / denom)
}

/// Dice/F1 overlap of the thresholded support masks. Two empty masks count
/// as perfect agreement.
pub fn f1_score(est: &[f64], truth: &[f64], threshold: f64) -> f64 {
    let mut both = 0usize;
    let mut est_on = 0usize;
    let mut truth_on = 0usize;
    for (&a, &b) in est.iter().zip(truth) {
        let ea = a >= threshold;
        let tb = b >= threshold;
        est_on += ea as usize;
        truth_on += tb as usize;
        both += (ea && tb) as usize;
    }
    if est_on + truth_on == 0 {
        return 1.0;
    }
    2.0 * both as f64 / (est_on + truth_on) as f64
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// 25th and 75th percentiles (nearest-rank).
pub fn quartiles(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let rank = |q: f64| -> f64 {
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n);
        v[idx - 1]
    };
    (rank(0.25), rank(0.75))
}
