use std::path::Path;
use std::process::Command;

use softcvi::harness::{cli, read_log, train, ExperimentConfig, RunStatus};
use softcvi::objectives::{NegativeSpec, ObjectiveSpec};

const BIN: &str = env!("CARGO_BIN_EXE_softcvi");

fn toy_config(dir: &Path) -> std::path::PathBuf {
    let text = format!(
        r#"
task = "toy-normal(d=1)"
family = "mean-field-normal(dim=1)"
steps = 300
replicates = 5
seed = 17

[objective]
kind = "softcvi"
k = 8
negative = {{ kind = "proposal-power", alpha = 0.75 }}

[optimizer]
lr = 0.01

[reference]
sampler = "analytic"
n_ref = 2000

[metrics]
n_mc = 2000

[output]
cache_dir = "{}"
"#,
        dir.join("cache").display()
    );
    let path = dir.join("toy.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("softcvi").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn run_writes_one_record_per_replicate_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let log = dir.path().join("runs.jsonl");
    let csv = dir.path().join("runs.csv");
    let code = cli(args(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--replicates",
        "3",
        "--out",
        log.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let records = read_log(&log).unwrap();
    assert_eq!(records.len(), 3);
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 3);
    for r in &records {
        assert!(r.is_ok());
        assert_eq!(r.loss_trace.len(), 3);
        assert!(r.metrics.as_ref().unwrap().forward_kl.is_some());
    }
    let summary = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(summary.lines().count(), 4);

    // a second run appends identical records, apart from wall time
    assert_eq!(
        cli(args(&["run", "--config", cfg.to_str().unwrap(), "--replicates", "3", "--out", log.to_str().unwrap()])),
        0
    );
    let all = read_log(&log).unwrap();
    assert_eq!(all.len(), 6);
    for (a, b) in all[..3].iter().zip(&all[3..]) {
        assert_eq!(a.without_timing(), b.without_timing());
    }

    // stored records can be re-evaluated
    let out = Command::new(BIN)
        .args(["metrics", "--record", log.to_str().unwrap(), "--line", "0", "--n-mc", "1000"])
        .args(["--cache-dir", dir.path().join("cache").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["line"], 0);
    assert!(line["metrics"]["coverage"]["actual"].is_array());
}

#[test]
fn parallel_suite_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let base = ["run", "--config", cfg.to_str().unwrap(), "--replicates", "4", "--steps", "100"];
    assert_eq!(cli(args(&[&base[..], &["--out", a.to_str().unwrap()]].concat())), 0);
    assert_eq!(cli(args(&[&base[..], &["--out", b.to_str().unwrap(), "--jobs", "3"]].concat())), 0);
    let mut x = read_log(&a).unwrap();
    let mut y = read_log(&b).unwrap();
    x.sort_by_key(|r| r.replicate);
    y.sort_by_key(|r| r.replicate);
    for (r, s) in x.iter().zip(&y) {
        assert_eq!(r.without_timing(), s.without_timing());
    }
}

#[test]
fn toy_normal_training_recovers_the_posterior() {
    let mut cfg = ExperimentConfig::new("toy-normal(d=1)", ObjectiveSpec::softcvi(8, NegativeSpec::proposal(1.0)));
    cfg.family = Some("mean-field-normal(dim=1)".into());
    cfg.steps = 5000;
    cfg.metrics.enabled = false;
    let r = train(&cfg, 3).unwrap();
    assert_eq!(r.status, RunStatus::Ok);
    let (mu, sigma) = (r.final_phi[0], r.final_phi[1].exp());
    assert!((mu - 0.8).abs() < 0.05, "μ = {mu}");
    assert!((sigma - 0.8f64.sqrt()).abs() < 0.05, "σ = {sigma}");
    let again = train(&cfg, 3).unwrap();
    assert_eq!(r.final_phi, again.final_phi);
}

#[test]
fn snr_sweep_writes_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snr.csv");
    let code = cli(args(&[
        "snr", "--task", "toy-normal", "--dim", "50", "--alphas", "0.75,1.0", "--sweep", "log-sigma", "--points", "3",
        "--n-seeds", "100", "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let headers = reader.headers().unwrap().clone();
    for h in ["objective", "value", "signal", "noise", "snr"] {
        assert!(headers.iter().any(|x| x == h), "{h} missing from {headers:?}");
    }
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    // softcvi at each alpha plus snis-fkl, three points each
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().any(|r| r[0].starts_with("snis-fkl")));
}

#[test]
fn gradient_check_exit_code_reflects_failures() {
    let ok = Command::new(BIN).args(["gradient-check", "--points", "1"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.lines().count() >= 35 && text.lines().all(|l| l.starts_with("PASS")));
    // a zero tolerance cannot be met by floating-point differences
    let bad = Command::new(BIN)
        .args(["gradient-check", "--points", "1", "--tolerance", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn malformed_config_is_a_usage_error_with_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "task = \"toy-normal(d=1)\"\n[objective]\nkind = \"softcvi\"\nk = \"eight\"\n").unwrap();
    let out = Command::new(BIN).args(["run", "--config", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("objective.k"), "{err}");
    assert_eq!(cli(args(&["run", "--bogus"])), 2);
}

#[test]
fn task_export_dumps_the_observation() {
    let out = Command::new(BIN).args(["task", "export", "--task", "toy-normal(d=50)"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("x_obs"), "{text}");
    let x = v.pointer("/data/x_obs").or_else(|| v.pointer("/x_obs")).expect("x_obs");
    assert_eq!(x.as_array().unwrap().len(), 50);
    assert!(x.as_array().unwrap().iter().all(|e| e.as_f64() == Some(1.0)));
}

#[test]
fn reference_command_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let out = Command::new(BIN)
            .args(["reference", "--task", "linear-regression(p=2, n=10)", "--seed", "3", "--n-ref", "1000"])
            .args(["--cache-dir", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first["cached"], false);
    assert_eq!(second["cached"], true);
    assert_eq!(first["mean"], second["mean"]);
    assert_eq!(first["kind"], "analytic");
}
