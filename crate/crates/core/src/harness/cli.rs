//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::gradcheck::gradient_audit;
use super::snr::{snr_sweep, sweep_objectives, SweepParam};
use super::suite::{csv_err, evaluate_record, read_log, run_suite};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_N_MC;
use crate::models::ModelTask;
use crate::numeric::RngKey;
use crate::reference::{MhConfig, ReferenceCache, SamplerConfig, SirConfig, DEFAULT_N_REF};

#[derive(Debug, Parser)]
#[command(name = "softcvi", version, about = "Soft-label contrastive variational inference experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate replicates from a config file.
    Run(RunArgs),
    /// Build (or fetch from cache) a reference posterior.
    Reference(ReferenceArgs),
    /// Re-evaluate stored run records against their references.
    Metrics(MetricsArgs),
    /// Gradient signal-to-noise sweep on the toy normal task.
    Snr(SnrArgs),
    /// Task utilities.
    Task {
        #[command(subcommand)]
        command: TaskCommand,
    },
    /// Finite-difference audit of every estimator on every family.
    GradientCheck(GradientCheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// JSON-lines run log (appended to).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-run CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    /// Task descriptor, e.g. `slcp` or `toy-normal(d=2)`.
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// analytic, sir or mcmc; the task's default when omitted.
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub n_ref: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// JSON-lines run log.
    #[arg(long)]
    pub record: PathBuf,
    /// Only this line (0-based) of the log.
    #[arg(long)]
    pub line: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_N_MC)]
    pub n_mc: usize,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SnrArgs {
    #[arg(long, default_value = "toy-normal")]
    pub task: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.75,1.0")]
    pub alphas: Vec<f64>,
    /// log-sigma or mu.
    #[arg(long, default_value = "log-sigma")]
    pub sweep: String,
    /// Offsets from the optimum, as `lo,hi`.
    #[arg(long, value_delimiter = ',', default_value = "-1,1", allow_hyphen_values = true)]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_seeds: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TaskCommand {
    /// Print a task's observation and hyperparameters as JSON.
    Export {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GradientCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(parsed.command) {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => {
            eprintln!("usage error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Reference(a) => reference(a),
        Command::Metrics(a) => metrics(a),
        Command::Snr(a) => snr(a),
        Command::Task {
            command: TaskCommand::Export { task, seed, out },
        } => {
            let t = ModelTask::parse(&task, super::train::keys::task(RngKey::new(seed)))?;
            let text = serde_json::to_string_pretty(&t.to_json())?;
            write_out(out.as_ref(), &text)?;
            Ok(0)
        }
        Command::GradientCheck(a) => gradient_check(a),
    }
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.out.is_some() {
        cfg.output.log = a.out;
    }
    if a.csv.is_some() {
        cfg.output.csv = a.csv;
    }
    let replicates = a.replicates.unwrap_or(cfg.replicates);
    let res = run_suite(&cfg, replicates, a.jobs)?;
    for r in &res.records {
        let m = r.metrics.as_ref();
        println!(
            "replicate {} seed {} {:?} ref_log_prob={} miscalibration={}",
            r.replicate,
            r.seed,
            r.status,
            m.map_or("-".into(), |m| format!("{:.4}", m.reference_log_prob.value)),
            m.map_or("-".into(), |m| format!("{:.4}", m.miscalibration)),
        );
    }
    Ok(if res.failures() > 0 { 1 } else { 0 })
}

fn sampler_from(name: Option<&str>, n_ref: Option<usize>, task: &ModelTask) -> Result<SamplerConfig> {
    let n = n_ref.unwrap_or(DEFAULT_N_REF);
    Ok(match name {
        None => match SamplerConfig::default_for(task) {
            SamplerConfig::Analytic { .. } => SamplerConfig::Analytic { n_ref: n },
            SamplerConfig::Sir(c) => SamplerConfig::Sir(SirConfig { n_ref: n, ..c }),
            SamplerConfig::Mcmc(c) => SamplerConfig::Mcmc(MhConfig { n_ref: n, ..c }),
        },
        Some("analytic") => SamplerConfig::Analytic { n_ref: n },
        Some("sir") => SamplerConfig::Sir(SirConfig {
            n_ref: n,
            ..Default::default()
        }),
        Some("mcmc") => SamplerConfig::Mcmc(MhConfig {
            n_ref: n,
            ..Default::default()
        }),
        Some(other) => return Err(Error::config("sampler", format!("unknown sampler `{other}`"))),
    })
}

fn reference(a: ReferenceArgs) -> Result<i32> {
    let task = ModelTask::parse(&a.task, super::train::keys::task(RngKey::new(a.seed)))?;
    let sampler = sampler_from(a.sampler.as_deref(), a.n_ref, &task)?;
    let cache = a.cache_dir.map_or_else(ReferenceCache::from_env, ReferenceCache::new);
    let (r, hit) = cache.get_or_build(&task, a.seed, &sampler)?;
    let summary = serde_json::json!({
        "task": r.task,
        "kind": r.kind,
        "n_ref": r.n_ref(),
        "cached": hit,
        "key": ReferenceCache::key(&task, a.seed, &sampler),
        "dir": cache.dir(),
        "mean": r.samples.column_means(),
        "std": r.samples.column_stds(),
        "diagnostics": r.diagnostics,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn metrics(a: MetricsArgs) -> Result<i32> {
    let records = read_log(&a.record)?;
    let cache = a.cache_dir.map_or_else(ReferenceCache::from_env, ReferenceCache::new);
    let mut failed = 0;
    for (i, rec) in records.iter().enumerate() {
        if a.line.is_some_and(|l| l != i) {
            continue;
        }
        let run = RngKey::new(rec.seed);
        let task = ModelTask::parse(&rec.task, super::train::keys::task(run))?;
        let sampler = rec.reference.clone().unwrap_or_else(|| SamplerConfig::default_for(&task));
        match evaluate_record(rec, &sampler, a.n_mc, &cache) {
            Ok(m) => println!("{}", serde_json::to_string(&serde_json::json!({"line": i, "seed": rec.seed, "metrics": m}))?),
            Err(e) => {
                failed += 1;
                eprintln!("line {i}: {e}");
            }
        }
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

fn snr(a: SnrArgs) -> Result<i32> {
    if a.task != "toy-normal" {
        return Err(Error::config("task", "SNR sweeps are defined on toy-normal"));
    }
    let param: SweepParam = a.sweep.parse()?;
    if a.range.len() != 2 || a.points < 2 {
        return Err(Error::config("range", "expected `lo,hi` and at least two points"));
    }
    let task = ModelTask::parse(&format!("toy-normal(d={})", a.dim), RngKey::new(0))?;
    let centre = super::snr::optimum(&task, param);
    let (lo, hi) = (a.range[0], a.range[1]);
    let values: Vec<f64> = (0..a.points)
        .map(|i| centre + lo + (hi - lo) * i as f64 / (a.points - 1) as f64)
        .collect();
    let objectives = sweep_objectives(&a.alphas, a.k);
    for o in &objectives {
        o.validate()?;
    }
    let rows = snr_sweep(a.dim, &objectives, param, &values, a.n_seeds, RngKey::new(a.seed))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config("csv", e.to_string()))?;
    write_out(a.out.as_ref(), String::from_utf8_lossy(&bytes).trim_end())?;
    Ok(0)
}

fn gradient_check(a: GradientCheckArgs) -> Result<i32> {
    let rows = gradient_audit(a.points, a.seed, a.tolerance)?;
    let mut failed = 0;
    for r in &rows {
        println!(
            "{} {:<32} {:<40} {:<34} max_rel_err={:.2e} skipped={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.task,
            r.family,
            r.objective,
            r.max_rel_error,
            r.skipped
        );
        failed += usize::from(!r.passed);
    }
    Ok(if failed > 0 { 1 } else { 0 })
}
