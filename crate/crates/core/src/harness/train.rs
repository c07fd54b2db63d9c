//! Seeded training loop.

use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::numeric::{AdamState, ParamVector, RngKey};
use crate::objectives::{loss_grad, Diagnostics, ObjectiveSpec};
use crate::reference::SamplerConfig;

/// Child keys of a run key.
pub mod keys {
    use crate::numeric::RngKey;

    pub fn task(run: RngKey) -> RngKey {
        run.fold_in(0)
    }
    pub fn init(run: RngKey) -> RngKey {
        run.fold_in(1)
    }
    pub fn step(run: RngKey, step: usize) -> RngKey {
        run.fold_in(2).fold_in(step as u64)
    }
    pub fn metrics(run: RngKey) -> RngKey {
        run.fold_in(4)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed { step: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub replicate: usize,
    pub seed: u64,
    pub task: String,
    pub family: String,
    pub objective: ObjectiveSpec,
    pub steps: usize,
    pub status: RunStatus,
    pub retries: usize,
    pub final_lr: f64,
    pub loss_trace: Vec<TracePoint>,
    pub final_phi: Vec<f64>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Same record with the wall-clock time zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        RunRecord {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

struct Checkpoint {
    step: usize,
    phi: Vec<f64>,
    adam: AdamState,
}

/// Trains replicate 0 style: the whole run is determined by `seed`.
pub fn train(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    train_replicate(config, 0, seed)
}

/// Runs `config.steps` Adam updates on the configured objective. A failed
/// step (non-finite loss or gradient, degenerate labels) restarts once from
/// the last checkpoint with half the learning rate; a second failure marks
/// the run failed.
pub fn train_replicate(config: &ExperimentConfig, replicate: usize, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let run = RngKey::new(seed);
    let task = config.build_task(keys::task(run))?;
    let family = config.build_family(&task)?;
    let mut phi: ParamVector = family.init_params(keys::init(run));
    let mut adam = AdamState::new(phi.len(), config.optimizer);
    let mut trace = Vec::new();
    let mut retries = 0;
    let mut status = RunStatus::Ok;
    let mut ckpt = Checkpoint {
        step: 0,
        phi: phi.values().to_vec(),
        adam: adam.clone(),
    };

    let mut step = 0;
    while step < config.steps {
        let outcome = loss_grad(&task, &family, &phi, keys::step(run, step), &config.objective).and_then(|lg| {
            if !lg.loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    reason: "non-finite loss".into(),
                });
            }
            adam.step(phi.values_mut(), &lg.grad)?;
            Ok(lg)
        });
        match outcome {
            Ok(lg) => {
                if step % config.trace_every == 0 {
                    trace.push(TracePoint {
                        step,
                        loss: lg.loss,
                        diagnostics: lg.diagnostics,
                    });
                    ckpt = Checkpoint {
                        step: step + 1,
                        phi: phi.values().to_vec(),
                        adam: adam.clone(),
                    };
                }
                step += 1;
            }
            Err(e) => {
                let reason = match e {
                    Error::Diverged { reason, .. } => reason,
                    other => other.to_string(),
                };
                if retries == 0 {
                    retries = 1;
                    warn!("seed {seed}: step {step} failed ({reason}); retrying from step {} at half the learning rate", ckpt.step);
                    step = ckpt.step;
                    phi.values_mut().copy_from_slice(&ckpt.phi);
                    adam = ckpt.adam.clone();
                    adam.config.lr *= 0.5;
                    trace.retain(|t: &TracePoint| t.step < step);
                } else {
                    warn!("seed {seed}: step {step} failed again ({reason}); giving up");
                    status = RunStatus::Failed { step, reason };
                    break;
                }
            }
        }
    }
    debug!("seed {seed}: {} steps in {:.1}s", step, start.elapsed().as_secs_f64());
    Ok(RunRecord {
        config_hash: config.hash(),
        replicate,
        seed,
        task: task.descriptor().to_string(),
        family: family.descriptor(),
        objective: config.objective,
        steps: step,
        status,
        retries,
        final_lr: adam.config.lr,
        loss_trace: trace,
        final_phi: phi.values().to_vec(),
        wall_seconds: start.elapsed().as_secs_f64(),
        reference: None,
        metrics: None,
        metrics_error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{EstimatorKind, NegativeSpec};

    fn toy(steps: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("toy-normal(d=1)", ObjectiveSpec::softcvi(8, NegativeSpec::proposal(1.0)));
        c.steps = steps;
        c.optimizer.lr = 0.01;
        c
    }

    #[test]
    fn zero_steps_returns_initial_parameters() {
        let c = toy(0);
        let r = train(&c, 4).unwrap();
        let task = c.build_task(keys::task(RngKey::new(4))).unwrap();
        let init = c.build_family(&task).unwrap().init_params(keys::init(RngKey::new(4)));
        assert_eq!(r.final_phi, init.values());
        assert!(r.loss_trace.is_empty());
        assert!(r.is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let c = toy(300);
        let a = train(&c, 11).unwrap();
        let b = train(&c, 11).unwrap();
        assert_eq!(a.final_phi, b.final_phi);
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.loss_trace.len(), 3);
        assert_ne!(train(&c, 12).unwrap().final_phi, a.final_phi);
    }

    #[test]
    fn persistent_failure_is_recorded() {
        // ELBO with a huge learning rate on the eight-schools family blows up
        let mut c = ExperimentConfig::new("eight-schools", ObjectiveSpec::of(EstimatorKind::Elbo, 8));
        c.steps = 2000;
        c.optimizer.lr = 1e6;
        let r = train(&c, 0).unwrap();
        if let RunStatus::Failed { .. } = r.status {
            assert_eq!(r.retries, 1);
            assert_eq!(r.final_lr, 5e5);
        } else {
            panic!("expected failure, got {:?}", r.status);
        }
    }
}
