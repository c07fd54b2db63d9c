//! `θ ~ N(0, 4 I)`, `x ~ N(θ, I)` with `x_obs = 1_d`.

use serde::Serialize;

use crate::distributions::base::normal_lpdf;
use crate::numeric::Real;

pub const PRIOR_SCALE: f64 = 2.0;

#[derive(Clone, Debug, Serialize)]
pub struct ToyNormal {
    pub x_obs: Vec<f64>,
}

impl ToyNormal {
    pub fn new(d: usize) -> Self {
        ToyNormal { x_obs: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.x_obs.len()
    }

    pub fn log_prior<R: Real>(&self, theta: &[R]) -> R {
        let t: Vec<R> = theta
            .iter()
            .map(|&t| normal_lpdf(t, R::cst(0.0), R::cst(PRIOR_SCALE)))
            .collect();
        R::sum(&t)
    }

    pub fn log_likelihood<R: Real>(&self, theta: &[R]) -> R {
        let t: Vec<R> = theta
            .iter()
            .zip(&self.x_obs)
            .map(|(&t, &x)| normal_lpdf(R::cst(x), t, R::cst(1.0)))
            .collect();
        R::sum(&t)
    }

    /// Conjugate posterior: mean `4/5 x`, variance `4/5` per coordinate.
    pub fn posterior_mean_var(&self) -> (Vec<f64>, f64) {
        let v = PRIOR_SCALE.powi(2) / (PRIOR_SCALE.powi(2) + 1.0);
        (self.x_obs.iter().map(|x| v * x).collect(), v)
    }

    /// `log p(x_obs)`; marginally `x ~ N(0, 5 I)`.
    pub fn log_evidence(&self) -> f64 {
        let s = (PRIOR_SCALE.powi(2) + 1.0).sqrt();
        self.x_obs.iter().map(|&x| normal_lpdf(x, 0.0, s)).sum()
    }
}
