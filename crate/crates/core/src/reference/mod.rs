//! Reference posteriors: exact Gaussian posteriors for conjugate tasks,
//! importance resampling for tasks with a proper prior, and adaptive
//! Metropolis for the rest.

pub mod analytic;
pub mod cache;
pub mod diagnostics;
pub mod mh;
pub mod sir;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelTask, TaskKind};
use crate::numeric::{RngKey, SampleMatrix};

pub use analytic::{analytic_posterior, GaussianDensity};
pub use cache::ReferenceCache;
pub use mh::{adaptive_mh, adaptive_mh_target, MhConfig, MhRun, MhTarget, Unconstrained};
pub use sir::{sir_reference, SirConfig, SirTarget};

pub const MIN_REFERENCE_SAMPLES: usize = 1000;
pub const DEFAULT_N_REF: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Analytic,
    Sir,
    Mcmc,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub importance_ess: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub r_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ess: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub acceptance: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Draws from (an accurate approximation of) a task's posterior.
#[derive(Clone, Debug)]
pub struct ReferencePosterior {
    pub kind: ReferenceKind,
    pub task: String,
    pub samples: SampleMatrix,
    /// Exact density, for analytic references.
    pub density: Option<GaussianDensity>,
    pub diagnostics: ReferenceDiagnostics,
}

impl ReferencePosterior {
    /// Checks the sample count and that every draw lies in the task support.
    pub fn new(
        kind: ReferenceKind,
        task: &ModelTask,
        samples: SampleMatrix,
        diagnostics: ReferenceDiagnostics,
    ) -> Result<Self> {
        if samples.n_rows() < MIN_REFERENCE_SAMPLES {
            return Err(Error::config(
                "reference.n_ref",
                format!("need at least {MIN_REFERENCE_SAMPLES} samples, got {}", samples.n_rows()),
            ));
        }
        if samples.dim() != task.dim() {
            return Err(Error::DimensionMismatch {
                expected: task.dim(),
                got: samples.dim(),
            });
        }
        if let Some(i) = samples.rows().position(|r| !task.support().contains(r)) {
            return Err(Error::ReferenceRejected(format!("sample {i} lies outside the task support")));
        }
        Ok(ReferencePosterior {
            kind,
            task: task.descriptor().to_string(),
            samples,
            density: None,
            diagnostics,
        })
    }

    pub fn n_ref(&self) -> usize {
        self.samples.n_rows()
    }
}

/// How to build a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    Analytic {
        #[serde(default = "default_n_ref")]
        n_ref: usize,
    },
    Sir(SirConfig),
    Mcmc(MhConfig),
}

fn default_n_ref() -> usize {
    DEFAULT_N_REF
}

impl SamplerConfig {
    /// Closed form where available, importance resampling for SLCP and
    /// adaptive Metropolis otherwise.
    pub fn default_for(task: &ModelTask) -> Self {
        match task.kind() {
            TaskKind::ToyNormal(_) | TaskKind::LinearRegression(_) => SamplerConfig::Analytic { n_ref: DEFAULT_N_REF },
            TaskKind::Slcp(_) => SamplerConfig::Sir(SirConfig::default()),
            TaskKind::EightSchools(_) | TaskKind::Garch(_) => SamplerConfig::Mcmc(MhConfig::default()),
        }
    }

    pub fn n_ref(&self) -> usize {
        match self {
            SamplerConfig::Analytic { n_ref } => *n_ref,
            SamplerConfig::Sir(c) => c.n_ref,
            SamplerConfig::Mcmc(c) => c.n_ref,
        }
    }
}

/// Key used for a reference built under run seed `seed`.
pub fn reference_key(seed: u64) -> RngKey {
    RngKey::new(seed).fold_in(3)
}

pub fn build_reference(task: &ModelTask, sampler: &SamplerConfig, key: RngKey) -> Result<ReferencePosterior> {
    match sampler {
        SamplerConfig::Analytic { n_ref } => analytic_posterior(task, *n_ref, key),
        SamplerConfig::Sir(c) => sir_reference(task, c, key),
        SamplerConfig::Mcmc(c) => adaptive_mh(task, c, key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_samples_rejected() {
        let task = ModelTask::parse("toy-normal(d=1)", RngKey::new(0)).unwrap();
        let s = SampleMatrix::new(1, vec![0.0; 999]);
        assert!(ReferencePosterior::new(ReferenceKind::Sir, &task, s, Default::default()).is_err());
    }

    #[test]
    fn samples_outside_support_rejected() {
        let task = ModelTask::parse("slcp", RngKey::new(0)).unwrap();
        let mut data = vec![0.0; 5 * 1000];
        data[7] = 3.5;
        let s = SampleMatrix::new(5, data);
        assert!(matches!(
            ReferencePosterior::new(ReferenceKind::Sir, &task, s, Default::default()),
            Err(Error::ReferenceRejected(_))
        ));
    }

    #[test]
    fn sampler_config_roundtrips_through_toml() {
        let cfg = SamplerConfig::Mcmc(MhConfig::default());
        let s = toml::to_string(&cfg).unwrap();
        let back: SamplerConfig = toml::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        let s: SamplerConfig = toml::from_str("sampler = \"sir\"\nn_prop = 5000").unwrap();
        assert_eq!(s.n_ref(), DEFAULT_N_REF);
    }
}
