//! Highest-density-region coverage of a variational density.

use serde::{Deserialize, Serialize};

use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::numeric::{ParamVector, RngKey, SampleMatrix};

pub const DEFAULT_N_MC: usize = 10_000;

/// Nominal levels 0.05, 0.10, …, 0.95.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub nominal: Vec<f64>,
    pub actual: Vec<f64>,
}

impl CoverageCurve {
    /// Mean of `actual - nominal` over the grid; negative when overconfident.
    pub fn miscalibration(&self) -> f64 {
        self.diffs().sum::<f64>() / self.nominal.len() as f64
    }

    /// Mean of `|actual - nominal|` over the grid.
    pub fn mean_abs_miscalibration(&self) -> f64 {
        self.diffs().map(f64::abs).sum::<f64>() / self.nominal.len() as f64
    }

    fn diffs(&self) -> impl Iterator<Item = f64> + '_ {
        self.actual.iter().zip(&self.nominal).map(|(a, n)| a - n)
    }
}

/// Sorted log-densities of `n_mc` fresh draws from q.
fn sorted_self_log_probs(family: &VariationalFamily, phi: &ParamVector, n_mc: usize, key: RngKey) -> Result<Vec<f64>> {
    if n_mc == 0 {
        return Err(Error::config("metrics.n_mc", "need at least one draw"));
    }
    let (_, mut lq) = family.sample_with_log_prob(phi, key, n_mc)?;
    lq.sort_by(f64::total_cmp);
    Ok(lq)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::config("metrics.gamma", format!("{gamma} is not in (0, 1)")))
    }
}

/// Empirical (1 − γ)-quantile of the sorted log-densities.
fn quantile_of_sorted(lq: &[f64], gamma: f64) -> f64 {
    let idx = ((1.0 - gamma) * lq.len() as f64).floor() as usize;
    lq[idx.min(lq.len() - 1)]
}

/// Log of the γ-HDR density threshold: θ is inside iff `log q(θ) ≥` it.
pub fn hdr_log_threshold(family: &VariationalFamily, phi: &ParamVector, gamma: f64, n_mc: usize, key: RngKey) -> Result<f64> {
    check_gamma(gamma)?;
    let lq = sorted_self_log_probs(family, phi, n_mc, key)?;
    Ok(quantile_of_sorted(&lq, gamma))
}

/// Density threshold of the γ-HDR.
pub fn hdr_threshold(family: &VariationalFamily, phi: &ParamVector, gamma: f64, n_mc: usize, key: RngKey) -> Result<f64> {
    Ok(hdr_log_threshold(family, phi, gamma, n_mc, key)?.exp())
}

/// Fraction of reference samples inside the γ-HDR of q for each γ. The q
/// draws behind the thresholds are shared across the grid.
pub fn coverage_curve(
    family: &VariationalFamily,
    phi: &ParamVector,
    reference: &SampleMatrix,
    grid: &[f64],
    n_mc: usize,
    key: RngKey,
) -> Result<CoverageCurve> {
    if reference.n_rows() == 0 {
        return Err(Error::config("metrics.reference", "empty reference"));
    }
    for &g in grid {
        check_gamma(g)?;
    }
    let lq = sorted_self_log_probs(family, phi, n_mc, key)?;
    let lref: Vec<f64> = reference.rows().map(|t| family.log_prob(phi, t)).collect();
    let n = lref.len() as f64;
    let actual = grid
        .iter()
        .map(|&g| {
            let thr = quantile_of_sorted(&lq, g);
            lref.iter().filter(|&&l| l >= thr).count() as f64 / n
        })
        .collect();
    Ok(CoverageCurve {
        nominal: grid.to_vec(),
        actual,
    })
}
