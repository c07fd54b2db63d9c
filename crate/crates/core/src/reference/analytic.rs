//! Closed-form Gaussian posteriors for the conjugate tasks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use super::{ReferenceDiagnostics, ReferenceKind, ReferencePosterior};
use crate::distributions::base::LN_2PI;
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::{RngKey, SampleMatrix};

/// Multivariate normal with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::config("reference.covariance", "not positive definite"))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(GaussianDensity {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        let r = DVector::from_column_slice(x) - &self.mean;
        let w = self
            .chol
            .l_dirty()
            .lower_triangle()
            .solve_lower_triangular(&r)
            .expect("factor has a positive diagonal");
        -0.5 * (w.norm_squared() + self.log_det + self.dim() as f64 * LN_2PI)
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        0.5 * (self.dim() as f64 * (1.0 + LN_2PI) + self.log_det)
    }

    pub fn sample(&self, key: RngKey, n: usize) -> SampleMatrix {
        let mut rng = key.rng();
        let l = self.chol.l();
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let eps = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
            data.extend((&self.mean + &l * eps).iter());
        }
        SampleMatrix::new(d, data)
    }

    /// `KL(self || other)` in closed form.
    pub fn kl_to(&self, other: &GaussianDensity) -> f64 {
        let d = self.dim() as f64;
        let tr = other.chol.solve(&self.cov).trace();
        let dm = &other.mean - &self.mean;
        let quad = dm.dot(&other.chol.solve(&dm));
        0.5 * (tr + quad - d + other.log_det - self.log_det)
    }
}

/// Exact posterior of a conjugate task with `n_ref` exact draws.
pub fn analytic_posterior(task: &ModelTask, n_ref: usize, key: RngKey) -> Result<ReferencePosterior> {
    let (mean, cov) = task.gaussian_posterior().ok_or_else(|| {
        Error::config(
            "reference.sampler",
            format!("no closed-form posterior for task `{}`", task.name()),
        )
    })?;
    let density = GaussianDensity::new(mean, cov)?;
    let samples = density.sample(key, n_ref);
    let mut r = ReferencePosterior::new(
        ReferenceKind::Analytic,
        task,
        samples,
        ReferenceDiagnostics::default(),
    )?;
    r.density = Some(density);
    Ok(r)
}

/// Rebuilds the density handle of a cached analytic reference.
pub(crate) fn density_for(task: &ModelTask) -> Option<GaussianDensity> {
    let (m, c) = task.gaussian_posterior()?;
    GaussianDensity::new(m, c).ok()
}
