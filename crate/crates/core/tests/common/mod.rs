#![allow(dead_code)]

use softcvi::distributions::VariationalFamily;
use softcvi::models::ModelTask;
use softcvi::numeric::{ParamVector, RngKey};

pub fn toy(d: usize) -> ModelTask {
    ModelTask::parse(&format!("toy-normal(d={d})"), RngKey::new(0)).unwrap()
}

/// Mean-field normal with every coordinate at `(loc, exp(log_scale))`.
pub fn mean_field_at(d: usize, loc: f64, log_scale: f64) -> (VariationalFamily, ParamVector) {
    let family = VariationalFamily::mean_field_normal(d);
    let mut phi = family.init_params(RngKey::new(0));
    phi.block_mut("loc").unwrap().fill(loc);
    phi.block_mut("log_scale").unwrap().fill(log_scale);
    (family, phi)
}

/// The toy-normal posterior `N(0.8, 0.8)` per coordinate, as a mean-field q.
pub fn toy_optimum(d: usize) -> (VariationalFamily, ParamVector) {
    mean_field_at(d, 0.8, 0.5 * 0.8f64.ln())
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(a).max(max_abs(b)).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Per-coordinate mean and standard error of the mean.
pub fn mean_and_se(draws: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = draws.len() as f64;
    let d = draws[0].len();
    let mean: Vec<f64> = (0..d).map(|j| draws.iter().map(|g| g[j]).sum::<f64>() / n).collect();
    let se = (0..d)
        .map(|j| {
            let v = draws.iter().map(|g| (g[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (v / n).sqrt()
        })
        .collect();
    (mean, se)
}
