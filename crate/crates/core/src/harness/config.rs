//! Experiment configuration, read from TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descriptor::Descriptor;
use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_N_MC;
use crate::models::ModelTask;
use crate::numeric::{AdamConfig, RngKey};
use crate::objectives::{EstimatorKind, ObjectiveSpec};
use crate::reference::SamplerConfig;

pub const DEFAULT_STEPS: usize = 50_000;
pub const DEFAULT_REPLICATES: usize = 10;
pub const TRACE_EVERY: usize = 100;

fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}
fn default_trace_every() -> usize {
    TRACE_EVERY
}
fn default_objective() -> ObjectiveSpec {
    ObjectiveSpec::of(EstimatorKind::Softcvi, 8)
}
fn default_true() -> bool {
    true
}
fn default_n_mc() -> usize {
    DEFAULT_N_MC
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            enabled: true,
            n_mc: DEFAULT_N_MC,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// JSON-lines run log.
    pub log: Option<PathBuf>,
    /// Per-run metric summary.
    pub csv: Option<PathBuf>,
    /// Reference cache; falls back to the cache environment variable.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Task descriptor, e.g. `linear-regression(p=10, n=100)`.
    pub task: String,
    /// Family descriptor; the task's default family when absent.
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    /// Reference sampler; the task's default when absent.
    #[serde(default)]
    pub reference: Option<SamplerConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(task: impl Into<String>, objective: ObjectiveSpec) -> Self {
        ExperimentConfig {
            task: task.into(),
            family: None,
            objective,
            steps: DEFAULT_STEPS,
            optimizer: AdamConfig::default(),
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            trace_every: TRACE_EVERY,
            reference: None,
            metrics: MetricsConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Parses and validates; errors name the offending field path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<config>", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_string())
        })?;
        if cfg.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks every referenced name and option. A zero step budget is
    /// allowed here so that programmatic callers can request an untrained
    /// record; config files must ask for at least one step.
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        let task = self.build_task(RngKey::new(0)).map_err(|e| prefix("task", e))?;
        self.build_family(&task).map_err(|e| prefix("family", e))?;
        if self.trace_every == 0 {
            return Err(Error::config("trace_every", "must be at least 1"));
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.lr.is_finite()) {
            return Err(Error::config("optimizer.lr", "must be positive"));
        }
        if self.metrics.n_mc == 0 {
            return Err(Error::config("metrics.n_mc", "must be at least 1"));
        }
        Ok(())
    }

    pub fn build_task(&self, key: RngKey) -> Result<ModelTask> {
        ModelTask::parse(&self.task, key)
    }

    pub fn family_descriptor(&self, task: &ModelTask) -> String {
        self.family.clone().unwrap_or_else(|| task.default_family())
    }

    pub fn build_family(&self, task: &ModelTask) -> Result<VariationalFamily> {
        let desc = Descriptor::parse(&self.family_descriptor(task))?;
        let family = VariationalFamily::build_for(&desc, task.support())?;
        if family.dim() != task.dim() {
            return Err(Error::DimensionMismatch {
                expected: task.dim(),
                got: family.dim(),
            });
        }
        Ok(family)
    }

    pub fn sampler(&self, task: &ModelTask) -> SamplerConfig {
        self.reference.clone().unwrap_or_else(|| SamplerConfig::default_for(task))
    }

    /// SHA-256 of the canonical JSON form, ignoring output paths.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        RngKey::new(self.seed).fold_in(r as u64).to_u64()
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{field}: {path}"), message),
        other => Error::config(field, other.to_string()),
    }
}
