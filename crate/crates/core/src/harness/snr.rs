//! Gradient SNR sweeps on the toy normal task.

use serde::Serialize;

use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::metrics::{grad_snr, SnrReport};
use crate::models::ModelTask;
use crate::numeric::RngKey;
use crate::objectives::{EstimatorKind, NegativeSpec, ObjectiveSpec};

/// Which shared parameter is swept; the other is held at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    LogSigma,
    Mu,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log-sigma" => Ok(SweepParam::LogSigma),
            "mu" => Ok(SweepParam::Mu),
            other => Err(Error::config("sweep", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SnrRow {
    pub objective: String,
    pub value: f64,
    pub signal: f64,
    pub noise: f64,
    pub snr: f64,
    pub degenerate: bool,
    pub excluded: usize,
}

/// Objectives of a sweep: SoftCVI at each α followed by SNIS-fKL.
pub fn sweep_objectives(alphas: &[f64], k: usize) -> Vec<ObjectiveSpec> {
    let mut v: Vec<ObjectiveSpec> = alphas
        .iter()
        .map(|&a| ObjectiveSpec::softcvi(k, NegativeSpec::proposal(a)))
        .collect();
    v.push(ObjectiveSpec::of(EstimatorKind::SnisFkl, k));
    v
}

/// Optimal value of the swept parameter.
pub fn optimum(task: &ModelTask, param: SweepParam) -> f64 {
    let (m, c) = task.gaussian_posterior().expect("toy normal is conjugate");
    match param {
        SweepParam::Mu => m[0],
        SweepParam::LogSigma => 0.5 * c[(0, 0)].ln(),
    }
}

/// SNR report for one objective with the swept parameter block at `value`
/// (shared by every coordinate) and the other block at the optimum. The
/// report is restricted to the swept block.
pub fn snr_at(
    task: &ModelTask,
    spec: &ObjectiveSpec,
    param: SweepParam,
    value: f64,
    n_seeds: usize,
    key: RngKey,
) -> Result<SnrReport> {
    let d = task.dim();
    let family = VariationalFamily::mean_field_normal(d);
    let mut phi = family.init_params(RngKey::new(0));
    let mu = optimum(task, SweepParam::Mu);
    let ls = optimum(task, SweepParam::LogSigma);
    let (mu, ls) = match param {
        SweepParam::Mu => (value, ls),
        SweepParam::LogSigma => (mu, value),
    };
    phi.block_mut("loc").expect("loc block").fill(mu);
    phi.block_mut("log_scale").expect("log_scale block").fill(ls);
    let report = grad_snr(spec, task, &family, &phi, n_seeds, key)?;
    let block = match param {
        SweepParam::Mu => "loc",
        SweepParam::LogSigma => "log_scale",
    };
    let idx: Vec<usize> = family.layout().block(block).expect("block").range().collect();
    Ok(report.select(&idx))
}

/// Sweeps `values` for every objective; one row per (objective, value).
pub fn snr_sweep(
    dim: usize,
    objectives: &[ObjectiveSpec],
    param: SweepParam,
    values: &[f64],
    n_seeds: usize,
    key: RngKey,
) -> Result<Vec<SnrRow>> {
    let task = ModelTask::parse(&format!("toy-normal(d={dim})"), RngKey::new(0))?;
    let mut rows = Vec::new();
    for spec in objectives {
        for (i, &v) in values.iter().enumerate() {
            let r = snr_at(&task, spec, param, v, n_seeds, key.fold_in(i as u64))?;
            rows.push(SnrRow {
                objective: spec.label(),
                value: v,
                signal: r.mean_signal(),
                noise: r.mean_noise(),
                snr: r.mean_snr(),
                degenerate: r.all_degenerate(),
                excluded: r.n_excluded,
            });
        }
    }
    Ok(rows)
}
