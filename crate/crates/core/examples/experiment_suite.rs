//! A small replicated experiment on the scaled linear regression task,
//! logged as JSON lines with a CSV summary.

use softcvi::harness::{run_suite, ExperimentConfig};
use softcvi::objectives::{NegativeSpec, ObjectiveSpec};

fn main() -> softcvi::Result<()> {
    let out = std::env::temp_dir().join("softcvi-example-suite");
    std::fs::create_dir_all(&out)?;
    let mut cfg = ExperimentConfig::new("linear-regression(p=10, n=100)", ObjectiveSpec::softcvi(8, NegativeSpec::proposal(0.75)));
    cfg.family = Some("full-rank-normal(dim=11)".into());
    cfg.steps = 20_000;
    cfg.output.log = Some(out.join("runs.jsonl"));
    cfg.output.csv = Some(out.join("summary.csv"));
    cfg.output.cache_dir = Some(out.join("cache"));
    let result = run_suite(&cfg, 4, 2)?;
    for r in &result.records {
        let m = r.metrics.as_ref().expect("metrics enabled");
        println!(
            "replicate {} seed {:>20}: forward KL {:.4}, miscalibration {:+.3}, {:.1}s",
            r.replicate,
            r.seed,
            m.forward_kl.unwrap_or(f64::NAN),
            m.miscalibration,
            r.wall_seconds
        );
    }
    println!("log and summary written to {}", out.display());
    Ok(())
}
