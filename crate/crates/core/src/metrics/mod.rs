//! Evaluation of a fitted q against a reference posterior.

mod coverage;
mod snr;

use serde::{Deserialize, Serialize};

use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::numeric::{ParamVector, RngKey, SampleMatrix};
use crate::reference::{GaussianDensity, ReferencePosterior};

pub use coverage::{
    coverage_curve, default_gamma_grid, hdr_log_threshold, hdr_threshold, CoverageCurve, DEFAULT_N_MC,
};
pub use snr::{grad_snr, SnrReport, ZERO_TOL};

/// Average log q over the reference samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLogProb {
    /// `-inf` when any reference sample lies outside q's support.
    #[serde(with = "nonfinite")]
    pub value: f64,
    /// Monte Carlo standard error over the samples inside the support.
    pub std_error: f64,
    pub outside_support: usize,
}

pub fn mean_reference_log_prob(
    family: &VariationalFamily,
    phi: &ParamVector,
    reference: &SampleMatrix,
) -> Result<ReferenceLogProb> {
    let n = reference.n_rows();
    if n == 0 {
        return Err(Error::config("metrics.reference", "empty reference"));
    }
    let lq: Vec<f64> = reference.rows().map(|t| family.log_prob(phi, t)).collect();
    let finite: Vec<f64> = lq.iter().copied().filter(|v| v.is_finite()).collect();
    let outside = n - finite.len();
    let m = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let var = finite.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (finite.len() as f64 - 1.0).max(1.0);
    Ok(ReferenceLogProb {
        value: if outside > 0 { f64::NEG_INFINITY } else { m },
        std_error: (var / finite.len().max(1) as f64).sqrt(),
        outside_support: outside,
    })
}

/// `-‖(mean(θ*) − mean(θ)) / std(θ*)‖₂`.
pub fn posterior_mean_accuracy(reference: &SampleMatrix, q_samples: &SampleMatrix) -> Result<f64> {
    if reference.n_rows() == 0 || q_samples.n_rows() == 0 {
        return Err(Error::config("metrics.samples", "empty sample set"));
    }
    if reference.dim() != q_samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: q_samples.dim(),
        });
    }
    let mr = reference.column_means();
    let sr = reference.column_stds();
    let mq = q_samples.column_means();
    let mut sq = 0.0;
    for j in 0..mr.len() {
        if sr[j] == 0.0 {
            return Err(Error::ZeroReferenceStd(j));
        }
        sq += ((mr[j] - mq[j]) / sr[j]).powi(2);
    }
    Ok(-sq.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub coverage: CoverageCurve,
    pub miscalibration: f64,
    pub mean_abs_miscalibration: f64,
    pub reference_log_prob: ReferenceLogProb,
    pub posterior_mean_accuracy: f64,
    /// Closed-form `KL(reference || q)` when both are Gaussian.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward_kl: Option<f64>,
    pub n_ref: usize,
    pub n_mc: usize,
}

/// All metrics for one fitted q. `key` drives the q draws shared by the
/// coverage thresholds and the posterior-mean comparison.
pub fn evaluate(
    family: &VariationalFamily,
    phi: &ParamVector,
    reference: &ReferencePosterior,
    n_mc: usize,
    key: RngKey,
) -> Result<MetricReport> {
    let coverage = coverage_curve(family, phi, &reference.samples, &default_gamma_grid(), n_mc, key)?;
    let reference_log_prob = mean_reference_log_prob(family, phi, &reference.samples)?;
    let q_samples = family.sample(phi, key, n_mc)?;
    let accuracy = posterior_mean_accuracy(&reference.samples, &q_samples)?;
    let forward_kl = match (&reference.density, family.gaussian(phi)) {
        (Some(p), Some((m, c))) => Some(p.kl_to(&GaussianDensity::new(m, c)?)),
        _ => None,
    };
    Ok(MetricReport {
        miscalibration: coverage.miscalibration(),
        mean_abs_miscalibration: coverage.mean_abs_miscalibration(),
        coverage,
        reference_log_prob,
        posterior_mean_accuracy: accuracy,
        forward_kl,
        n_ref: reference.n_ref(),
        n_mc,
    })
}

/// Serializes non-finite floats as strings so JSON stays valid.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(v.to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
