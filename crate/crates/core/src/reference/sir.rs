//! Sampling/importance resampling from the prior.
//!
//! Proposal `i` is drawn from its own key `key.fold_in(i)`, so only the
//! log-weights need to be stored; selected proposals are regenerated.

use log::warn;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ReferenceDiagnostics, ReferenceKind, ReferencePosterior};
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::{RngKey, SampleMatrix};

const ESS_WARN: f64 = 100.0;
const ESS_MIN: f64 = 10.0;

/// A proper prior to draw from and a likelihood to weight by.
pub trait SirTarget: Sync {
    fn dim(&self) -> usize;
    fn sample_prior(&self, rng: &mut ChaCha12Rng) -> Option<Vec<f64>>;
    fn log_likelihood(&self, theta: &[f64]) -> f64;
}

impl SirTarget for ModelTask {
    fn dim(&self) -> usize {
        ModelTask::dim(self)
    }
    fn sample_prior(&self, rng: &mut ChaCha12Rng) -> Option<Vec<f64>> {
        ModelTask::sample_prior(self, rng)
    }
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        ModelTask::log_likelihood(self, theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirConfig {
    pub n_prop: usize,
    pub n_ref: usize,
}

impl Default for SirConfig {
    fn default() -> Self {
        SirConfig {
            n_prop: 10_000_000,
            n_ref: 10_000,
        }
    }
}

/// Proposal `i`.
pub fn proposal<T: SirTarget + ?Sized>(target: &T, key: RngKey, i: usize) -> Result<Vec<f64>> {
    target
        .sample_prior(&mut key.fold_in(i as u64).rng())
        .ok_or_else(|| Error::config("reference.sampler", "importance resampling needs a proper prior"))
}

/// Log-likelihood weights of proposals `0..n_prop`.
pub fn sir_log_weights<T: SirTarget + ?Sized>(target: &T, n_prop: usize, key: RngKey) -> Result<Vec<f64>> {
    proposal(target, key, 0)?;
    Ok((0..n_prop)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let theta = proposal(target, key, i).expect("prior checked above");
            let lw = target.log_likelihood(&theta);
            if lw.is_nan() {
                f64::NEG_INFINITY
            } else {
                lw
            }
        })
        .collect())
}

/// Self-normalized weights.
pub fn normalized_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    crate::numeric::softmax(log_w)
}

/// `(Σw)² / Σw²` computed from log-weights.
pub fn importance_ess(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (s, s2) = log_w.iter().fold((0.0, 0.0), |(s, s2), &l| {
        let w = (l - m).exp();
        (s + w, s2 + w * w)
    });
    s * s / s2
}

/// Multinomial resampling: `n` indices drawn with replacement in proportion
/// to `exp(log_w)`, returned in ascending order.
pub fn resample_indices(log_w: &[f64], n: usize, key: RngKey) -> Result<Vec<usize>> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = log_w.iter().map(|l| (l - m).exp()).sum();
    let mut rng = key.rng();
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * total).collect();
    u.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut it = u.into_iter().peekable();
    for (i, l) in log_w.iter().enumerate() {
        cum += (l - m).exp();
        while let Some(&v) = it.peek() {
            if v < cum {
                out.push(i);
                it.next();
            } else {
                break;
            }
        }
    }
    // rounding can leave the largest uniforms above the final sum
    let last = log_w.iter().rposition(|l| *l > f64::NEG_INFINITY).unwrap_or(0);
    out.extend(it.map(|_| last));
    Ok(out)
}

/// SIR reference for a task with a proper prior.
pub fn sir_reference(task: &ModelTask, config: &SirConfig, key: RngKey) -> Result<ReferencePosterior> {
    let (samples, ess) = sir_samples(task, config, key)?;
    let mut diagnostics = ReferenceDiagnostics {
        importance_ess: Some(ess),
        ..Default::default()
    };
    if ess < ESS_WARN {
        let msg = format!("importance ESS {ess:.1} below {ESS_WARN}");
        warn!("{msg}");
        diagnostics.warnings.push(msg);
    }
    ReferencePosterior::new(ReferenceKind::Sir, task, samples, diagnostics)
}

/// Resampled draws and the importance ESS for any [`SirTarget`].
pub fn sir_samples<T: SirTarget + ?Sized>(
    target: &T,
    config: &SirConfig,
    key: RngKey,
) -> Result<(SampleMatrix, f64)> {
    if config.n_prop < config.n_ref {
        return Err(Error::config("reference.n_prop", "must be at least n_ref"));
    }
    let prop_key = key.fold_in(0);
    let log_w = sir_log_weights(target, config.n_prop, prop_key)?;
    let ess = importance_ess(&log_w);
    if ess < ESS_MIN {
        return Err(Error::ReferenceRejected(format!(
            "importance ESS {ess:.2} below {ESS_MIN}"
        )));
    }
    let idx = resample_indices(&log_w, config.n_ref, key.fold_in(1))?;
    drop(log_w);
    let rows = idx
        .into_iter()
        .map(|i| proposal(target, prop_key, i))
        .collect::<Result<Vec<_>>>()?;
    Ok((SampleMatrix::from_rows(target.dim(), rows), ess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::base::normal_lpdf;

    /// θ ~ N(0, 1), x | θ ~ N(θ, σ²) observed at `x`.
    struct Conjugate {
        x: f64,
        sigma: f64,
    }

    impl SirTarget for Conjugate {
        fn dim(&self) -> usize {
            1
        }
        fn sample_prior(&self, rng: &mut ChaCha12Rng) -> Option<Vec<f64>> {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            Some(vec![z])
        }
        fn log_likelihood(&self, theta: &[f64]) -> f64 {
            if self.sigma.is_infinite() {
                0.0
            } else {
                normal_lpdf(self.x, theta[0], self.sigma)
            }
        }
    }

    #[test]
    fn flat_likelihood_returns_prior_draws() {
        let t = Conjugate {
            x: 0.0,
            sigma: f64::INFINITY,
        };
        let key = RngKey::new(3);
        let cfg = SirConfig {
            n_prop: 5000,
            n_ref: 2000,
        };
        let (s, ess) = sir_samples(&t, &cfg, key).unwrap();
        assert!((ess - 5000.0).abs() < 1e-6);
        // every row is one of the proposals
        for r in s.rows() {
            let i = (0..5000)
                .find(|&i| proposal(&t, key.fold_in(0), i).unwrap()[0] == r[0])
                .is_some();
            assert!(i);
        }
        let m = s.column_means()[0];
        assert!(m.abs() < 4.0 / 2000f64.sqrt());
    }

    #[test]
    fn weights_normalize() {
        let t = Conjugate { x: 1.0, sigma: 0.5 };
        let lw = sir_log_weights(&t, 1000, RngKey::new(1)).unwrap();
        let w = normalized_weights(&lw).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resampled_mean_tracks_importance_mean() {
        let t = Conjugate { x: 1.0, sigma: 0.5 };
        let key = RngKey::new(9);
        let n_prop = 20_000;
        let lw = sir_log_weights(&t, n_prop, key.fold_in(0)).unwrap();
        let w = normalized_weights(&lw).unwrap();
        let snis: f64 = (0..n_prop)
            .map(|i| w[i] * proposal(&t, key.fold_in(0), i).unwrap()[0])
            .sum();
        let mut errs = Vec::new();
        for n_ref in [1_000, 20_000, 200_000] {
            let idx = resample_indices(&lw, n_ref, key.fold_in(1)).unwrap();
            let m = idx
                .iter()
                .map(|&i| proposal(&t, key.fold_in(0), i).unwrap()[0])
                .sum::<f64>()
                / n_ref as f64;
            errs.push((m - snis).abs());
        }
        assert!(errs[2] < errs[0] && errs[2] < 0.005, "{errs:?}");
        // and the importance mean is near the exact posterior mean 0.8
        assert!((snis - 0.8).abs() < 0.02, "{snis}");
    }

    #[test]
    fn tiny_ess_is_an_error() {
        let t = Conjugate { x: 6.0, sigma: 0.01 };
        let cfg = SirConfig {
            n_prop: 1000,
            n_ref: 1000,
        };
        assert!(matches!(
            sir_samples(&t, &cfg, RngKey::new(0)),
            Err(Error::ReferenceRejected(_))
        ));
    }

    #[test]
    fn improper_prior_is_config_error() {
        let task = ModelTask::parse("garch", RngKey::new(0)).unwrap();
        let cfg = SirConfig {
            n_prop: 1000,
            n_ref: 1000,
        };
        assert!(matches!(
            sir_reference(&task, &cfg, RngKey::new(0)),
            Err(Error::Config { .. })
        ));
    }
}
