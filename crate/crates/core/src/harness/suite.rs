//! Multi-replicate runs with metric evaluation and persistent logs.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::train::{keys, train_replicate, RunRecord};
use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::descriptor::Descriptor;
use crate::metrics::{evaluate, MetricReport};
use crate::models::ModelTask;
use crate::numeric::{ParamVector, RngKey};
use crate::reference::{ReferenceCache, SamplerConfig};

pub fn cache_for(config: &ExperimentConfig) -> ReferenceCache {
    match &config.output.cache_dir {
        Some(d) => ReferenceCache::new(d),
        None => ReferenceCache::from_env(),
    }
}

/// Re-evaluates a stored record against its (cached) reference.
pub fn evaluate_record(
    record: &RunRecord,
    sampler: &SamplerConfig,
    n_mc: usize,
    cache: &ReferenceCache,
) -> Result<MetricReport> {
    let run = RngKey::new(record.seed);
    let task = ModelTask::parse(&record.task, keys::task(run))?;
    let family = VariationalFamily::build_for(&Descriptor::parse(&record.family)?, task.support())?;
    let phi = ParamVector::new(family.layout().clone(), record.final_phi.clone())?;
    let (reference, _) = cache.get_or_build(&task, record.seed, sampler)?;
    evaluate(&family, &phi, &reference, n_mc, keys::metrics(run))
}

/// Trains replicate `r` and, if enabled, evaluates it against the reference.
pub fn run_replicate(config: &ExperimentConfig, r: usize, cache: &ReferenceCache) -> Result<RunRecord> {
    let seed = config.replicate_seed(r);
    let mut rec = train_replicate(config, r, seed)?;
    if config.metrics.enabled && rec.is_ok() {
        let task = config.build_task(keys::task(RngKey::new(seed)))?;
        let sampler = config.sampler(&task);
        match evaluate_record(&rec, &sampler, config.metrics.n_mc, cache) {
            Ok(m) => rec.metrics = Some(m),
            Err(e) => rec.metrics_error = Some(e.to_string()),
        }
        rec.reference = Some(sampler);
    }
    Ok(rec)
}

/// One row of the per-run CSV summary.
#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub replicate: usize,
    pub seed: u64,
    pub task: String,
    pub objective: String,
    pub ok: bool,
    pub final_loss: Option<f64>,
    pub reference_log_prob: Option<f64>,
    pub miscalibration: Option<f64>,
    pub mean_abs_miscalibration: Option<f64>,
    pub posterior_mean_accuracy: Option<f64>,
    pub forward_kl: Option<f64>,
    pub wall_seconds: f64,
}

impl From<&RunRecord> for SummaryRow {
    fn from(r: &RunRecord) -> Self {
        let m = r.metrics.as_ref();
        SummaryRow {
            replicate: r.replicate,
            seed: r.seed,
            task: r.task.clone(),
            objective: r.objective.label(),
            ok: r.is_ok(),
            final_loss: r.loss_trace.last().map(|t| t.loss),
            reference_log_prob: m.map(|m| m.reference_log_prob.value),
            miscalibration: m.map(|m| m.miscalibration),
            mean_abs_miscalibration: m.map(|m| m.mean_abs_miscalibration),
            posterior_mean_accuracy: m.map(|m| m.posterior_mean_accuracy),
            forward_kl: m.and_then(|m| m.forward_kl),
            wall_seconds: r.wall_seconds,
        }
    }
}

pub fn write_summary_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(SummaryRow::from(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::config("csv", format!("{other:?}")),
    }
}

pub fn read_log(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Outcome of [`run_suite`]: records in replicate order.
#[derive(Debug)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
}

impl SuiteResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Runs `replicates` trainings with up to `jobs` in flight. Each finished
/// record is appended to the JSON-lines log immediately, so a killed suite
/// loses only in-flight runs.
pub fn run_suite(config: &ExperimentConfig, replicates: usize, jobs: usize) -> Result<SuiteResult> {
    config.validate()?;
    let cache = cache_for(config);
    let log = match &config.output.log {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?))
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let records = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let rec = run_replicate(config, r, &cache)?;
                info!("replicate {r} (seed {}) finished: {:?}", rec.seed, rec.status);
                if let Some(f) = &log {
                    let line = serde_json::to_string(&rec)?;
                    let mut f = f.lock().expect("log writer poisoned");
                    writeln!(f, "{line}")?;
                    f.flush()?;
                }
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    if let Some(p) = &config.output.csv {
        write_summary_csv(p, &records)?;
    }
    Ok(SuiteResult { records })
}
