//! Log-space reductions.

use super::autodiff::Real;
use crate::error::{Error, Result};

/// `ln Σ exp(v_k)`, evaluated as `max(v) + ln Σ exp(v - max)`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || v.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// Differentiable log-sum-exp. The shift is taken from the values and held
/// constant, which leaves the derivative unchanged.
pub fn log_sum_exp_real<R: Real>(v: &[R]) -> Result<R> {
    let m = v.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || v.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let terms: Vec<R> = v.iter().map(|&x| (x - m).exp()).collect();
    Ok(R::sum(&terms).ln() + m)
}

/// Normalized exponentials of `z`.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    // normalizing by the sum (not exp(z - lse)) keeps ties exactly 1/K
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|x| x / s).collect())
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Effective sample size `1 / Σ w_k²` of normalized weights.
pub fn effective_sample_size(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}
