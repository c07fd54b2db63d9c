//! Signal-to-noise ratio of stochastic gradients across seeds.

use serde::{Deserialize, Serialize};

use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::{ParamVector, RngKey};
use crate::objectives::{loss_grad, ObjectiveSpec};

/// Below this, a mean or standard deviation counts as zero.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    /// `|mean|` of each gradient coordinate.
    pub signal: Vec<f64>,
    /// Sample standard deviation of each coordinate.
    pub noise: Vec<f64>,
    /// `signal / noise`; NaN where both are zero.
    pub snr: Vec<f64>,
    /// Coordinates whose ratio is 0/0.
    pub degenerate: Vec<bool>,
    pub n_used: usize,
    pub n_excluded: usize,
}

impl SnrReport {
    /// Accumulates per-coordinate statistics from gradient draws; draws with
    /// a non-finite entry are excluded and counted.
    pub fn from_draws<I: IntoIterator<Item = Vec<f64>>>(dim: usize, draws: I) -> Self {
        let mut n = 0usize;
        let mut excluded = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for g in draws {
            if g.len() != dim || g.iter().any(|v| !v.is_finite()) {
                excluded += 1;
                continue;
            }
            n += 1;
            for j in 0..dim {
                let d = g[j] - mean[j];
                mean[j] += d / n as f64;
                m2[j] += d * (g[j] - mean[j]);
            }
        }
        let signal: Vec<f64> = mean.iter().map(|m| m.abs()).collect();
        let noise: Vec<f64> = m2.iter().map(|s| (s / (n as f64 - 1.0).max(1.0)).sqrt()).collect();
        let mut snr = Vec::with_capacity(dim);
        let mut degenerate = Vec::with_capacity(dim);
        for (s, z) in signal.iter().zip(&noise) {
            let zero_over_zero = *s < ZERO_TOL && *z < ZERO_TOL;
            degenerate.push(zero_over_zero);
            snr.push(if zero_over_zero { f64::NAN } else { s / z });
        }
        SnrReport {
            signal,
            noise,
            snr,
            degenerate,
            n_used: n,
            n_excluded: excluded,
        }
    }

    /// Parameter-averaged SNR over non-degenerate coordinates; NaN if all
    /// are degenerate.
    pub fn mean_snr(&self) -> f64 {
        mean_where(&self.snr, &self.degenerate)
    }

    pub fn mean_signal(&self) -> f64 {
        self.signal.iter().sum::<f64>() / self.signal.len() as f64
    }

    pub fn mean_noise(&self) -> f64 {
        self.noise.iter().sum::<f64>() / self.noise.len() as f64
    }

    pub fn all_degenerate(&self) -> bool {
        self.degenerate.iter().all(|d| *d)
    }

    /// Restricts the report to a subset of coordinates.
    pub fn select(&self, idx: &[usize]) -> SnrReport {
        SnrReport {
            signal: idx.iter().map(|&i| self.signal[i]).collect(),
            noise: idx.iter().map(|&i| self.noise[i]).collect(),
            snr: idx.iter().map(|&i| self.snr[i]).collect(),
            degenerate: idx.iter().map(|&i| self.degenerate[i]).collect(),
            n_used: self.n_used,
            n_excluded: self.n_excluded,
        }
    }
}

fn mean_where(v: &[f64], skip: &[bool]) -> f64 {
    let (s, n) = v
        .iter()
        .zip(skip)
        .filter(|(_, d)| !**d)
        .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Gradient SNR of an objective at φ over `n_seeds` keys `key.fold_in(i)`.
pub fn grad_snr(
    objective: &ObjectiveSpec,
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    n_seeds: usize,
    key: RngKey,
) -> Result<SnrReport> {
    if n_seeds < 2 {
        return Err(Error::config("snr.n_seeds", "need at least two seeds"));
    }
    objective.validate()?;
    let draws = (0..n_seeds).map(|i| match loss_grad(task, family, phi, key.fold_in(i as u64), objective) {
        Ok(lg) => lg.grad,
        Err(_) => vec![f64::NAN; phi.len()],
    });
    Ok(SnrReport::from_draws(phi.len(), draws))
}
