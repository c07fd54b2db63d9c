//! Adaptive random-walk Metropolis in unconstrained space.
//!
//! During warmup the proposal covariance tracks the empirical covariance of
//! the chain (Haario et al.) and a global scale is tuned towards an
//! acceptance rate of 0.234. Both are frozen afterwards so the retained
//! draws come from a fixed Markov kernel.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat};
use super::{ReferenceDiagnostics, ReferenceKind, ReferencePosterior};
use crate::distributions::Support;
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::{RngKey, SampleMatrix};

const TARGET_ACCEPT: f64 = 0.234;
const MAX_INIT_TRIES: usize = 100;

/// Log-density on ℝ^d, up to a constant.
pub trait MhTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, z: &[f64]) -> f64;
}

/// A task's log-joint pulled back to unconstrained space.
pub struct Unconstrained<'a> {
    task: &'a ModelTask,
}

impl<'a> Unconstrained<'a> {
    pub fn new(task: &'a ModelTask) -> Self {
        Unconstrained { task }
    }

    pub fn support(&self) -> &Support {
        self.task.support()
    }
}

impl MhTarget for Unconstrained<'_> {
    fn dim(&self) -> usize {
        self.task.dim()
    }
    fn log_density(&self, z: &[f64]) -> f64 {
        let (theta, log_det) = self.task.support().constrain(z);
        self.task.log_joint(&theta) + log_det
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhConfig {
    pub n_chains: usize,
    pub warmup: usize,
    /// Retained iterations per chain.
    pub n_steps: usize,
    pub n_ref: usize,
    /// Standard deviation of the chain initializations in unconstrained space.
    pub init_scale: f64,
    pub max_rhat: f64,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            n_chains: 4,
            warmup: 10_000,
            n_steps: 25_000,
            n_ref: 10_000,
            init_scale: 1.0,
            max_rhat: 1.05,
        }
    }
}

impl MhConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains < 2 {
            return Err(Error::config("reference.n_chains", "split R-hat needs at least two chains"));
        }
        if self.n_steps < 4 {
            return Err(Error::config("reference.n_steps", "too few retained steps"));
        }
        if self.n_ref > self.n_chains * self.n_steps {
            return Err(Error::config("reference.n_ref", "exceeds the number of retained draws"));
        }
        Ok(())
    }
}

/// Retained draws of every chain plus per-dimension diagnostics.
#[derive(Clone, Debug)]
pub struct MhRun {
    pub dim: usize,
    /// `chains[c]` is row-major `n_steps × dim`.
    pub chains: Vec<Vec<f64>>,
    pub acceptance: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl MhRun {
    pub fn trace(&self, chain: usize, j: usize) -> Vec<f64> {
        self.chains[chain].chunks_exact(self.dim).map(|r| r[j]).collect()
    }

    /// `n` draws taken evenly across chains and iterations.
    pub fn thinned(&self, n: usize) -> SampleMatrix {
        let m = self.chains.len();
        let steps = self.chains[0].len() / self.dim;
        let mut data = Vec::with_capacity(n * self.dim);
        for i in 0..n {
            let c = i % m;
            let t = (i / m) * steps * m / n.max(1);
            data.extend_from_slice(&self.chains[c][t * self.dim..(t + 1) * self.dim]);
        }
        SampleMatrix::new(self.dim, data)
    }

    pub fn max_rhat(&self) -> f64 {
        self.r_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Welford {
    n: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Welford {
            n: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn cov(&self) -> DMatrix<f64> {
        &self.m2 / (self.n - 1.0).max(1.0)
    }
}

fn run_chain<T: MhTarget + ?Sized>(target: &T, cfg: &MhConfig, key: RngKey) -> Result<(Vec<f64>, f64)> {
    let d = target.dim();
    let mut rng = key.rng();
    let gauss = |rng: &mut rand_chacha::ChaCha12Rng| -> f64 { StandardNormal.sample(rng) };

    let mut z = Vec::new();
    let mut lp = f64::NEG_INFINITY;
    for _ in 0..MAX_INIT_TRIES {
        z = (0..d).map(|_| cfg.init_scale * gauss(&mut rng)).collect();
        lp = target.log_density(&z);
        if lp.is_finite() {
            break;
        }
    }
    if !lp.is_finite() {
        return Err(Error::ReferenceRejected(format!(
            "no finite starting point after {MAX_INIT_TRIES} draws"
        )));
    }

    let mut log_scale = (2.38f64 * 2.38 / d as f64).ln();
    let mut chol = DMatrix::<f64>::identity(d, d) * 0.1;
    let mut stats = Welford::new(d);
    let mut proposal = vec![0.0; d];
    let total = cfg.warmup + cfg.n_steps;
    let mut kept = Vec::with_capacity(cfg.n_steps * d);
    let mut accepted = 0usize;

    for t in 0..total {
        let warm = t < cfg.warmup;
        let eps = DVector::from_fn(d, |_, _| gauss(&mut rng));
        let step = &chol * eps * (0.5 * log_scale).exp();
        for j in 0..d {
            proposal[j] = z[j] + step[j];
        }
        let lp_new = target.log_density(&proposal);
        let log_ratio = lp_new - lp;
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        if rng.random::<f64>() < accept_prob {
            z.copy_from_slice(&proposal);
            lp = lp_new;
            if !warm {
                accepted += 1;
            }
        }
        if warm {
            let gamma = ((t + 1) as f64).powf(-0.6);
            log_scale += gamma * (accept_prob - TARGET_ACCEPT);
            if t == cfg.warmup / 2 {
                // forget the transient from the initialization
                stats = Welford::new(d);
            }
            stats.push(&z);
            if t % 100 == 99 && stats.n > 10.0 * d as f64 {
                let cov = stats.cov() + DMatrix::<f64>::identity(d, d) * 1e-8;
                if let Some(c) = Cholesky::new(cov) {
                    chol = c.l();
                }
            }
        } else {
            kept.extend_from_slice(&z);
        }
    }
    Ok((kept, accepted as f64 / cfg.n_steps as f64))
}

/// Runs `n_chains` independent chains on any target.
pub fn adaptive_mh_target<T: MhTarget + ?Sized>(target: &T, cfg: &MhConfig, key: RngKey) -> Result<MhRun> {
    cfg.validate()?;
    let d = target.dim();
    let results = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(target, cfg, key.fold_in(c as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (chains, acceptance): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut run = MhRun {
        dim: d,
        chains,
        acceptance,
        r_hat: Vec::with_capacity(d),
        ess: Vec::with_capacity(d),
    };
    for j in 0..d {
        let traces: Vec<Vec<f64>> = (0..cfg.n_chains).map(|c| run.trace(c, j)).collect();
        run.r_hat.push(split_rhat(&traces));
        run.ess.push(effective_sample_size(&traces));
    }
    Ok(run)
}

/// MCMC reference posterior for a task. Chains run on the unconstrained
/// pullback; draws are mapped back to θ.
pub fn adaptive_mh(task: &ModelTask, cfg: &MhConfig, key: RngKey) -> Result<ReferencePosterior> {
    let target = Unconstrained::new(task);
    let run = adaptive_mh_target(&target, cfg, key)?;
    let diagnostics = ReferenceDiagnostics {
        r_hat: run.r_hat.clone(),
        ess: run.ess.clone(),
        acceptance: run.acceptance.clone(),
        ..Default::default()
    };
    let worst = run.max_rhat();
    if worst.is_nan() || worst > cfg.max_rhat {
        let detail = serde_json::to_string(&diagnostics)?;
        return Err(Error::ReferenceRejected(format!(
            "split R-hat {:.4} exceeds {}: {detail}",
            run.max_rhat(),
            cfg.max_rhat
        )));
    }
    let z = run.thinned(cfg.n_ref);
    let rows: Vec<Vec<f64>> = z.rows().map(|r| task.support().constrain(r).0).collect();
    let samples = SampleMatrix::from_rows(task.dim(), rows);
    ReferencePosterior::new(ReferenceKind::Mcmc, task, samples, diagnostics)
}
