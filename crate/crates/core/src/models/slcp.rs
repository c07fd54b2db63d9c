//! Simple likelihood, complex posterior: a bivariate normal whose scales
//! are squared parameters, giving four symmetric posterior modes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::distributions::base::LN_2PI;
use crate::numeric::{Real, RngKey};

pub const BOUND: f64 = 3.0;
pub const N_OBS: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct Slcp {
    /// Four bivariate observations, flattened.
    pub x_obs: Vec<f64>,
    pub theta_true: Vec<f64>,
}

/// Mean, scales and correlation of the likelihood at θ.
fn likelihood_params<R: Real>(theta: &[R]) -> (R, R, R, R, R) {
    (theta[0], theta[1], theta[2].square(), theta[3].square(), theta[4].tanh())
}

impl Slcp {
    /// Draws θ from the prior and simulates the observations.
    pub fn simulate(key: RngKey) -> Self {
        let mut rng = key.rng();
        let theta_true: Vec<f64> = (0..5).map(|_| rng.random_range(-BOUND..BOUND)).collect();
        let x_obs = Self::simulate_at(&theta_true, &mut rng);
        Slcp { x_obs, theta_true }
    }

    pub fn simulate_at<G: Rng + ?Sized>(theta: &[f64], rng: &mut G) -> Vec<f64> {
        let (m1, m2, s1, s2, rho) = likelihood_params(theta);
        let mut x = Vec::with_capacity(2 * N_OBS);
        for _ in 0..N_OBS {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            x.push(m1 + s1 * z1);
            x.push(m2 + s2 * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
        }
        x
    }

    /// Uniform prior on `(-3, 3)^5`.
    pub fn log_prior(&self) -> f64 {
        -5.0 * (2.0 * BOUND).ln()
    }

    pub fn log_likelihood<R: Real>(&self, theta: &[R]) -> R {
        let (m1, m2, s1, s2, rho) = likelihood_params(theta);
        let one_m_r2 = -rho.square() + 1.0;
        let norm = -(s1.ln() + s2.ln()) - one_m_r2.ln() * 0.5 - LN_2PI;
        let mut quad = Vec::with_capacity(N_OBS);
        for j in 0..N_OBS {
            let a = (-m1 + self.x_obs[2 * j]) / s1;
            let b = (-m2 + self.x_obs[2 * j + 1]) / s2;
            quad.push(a.square() - rho * a * b * 2.0 + b.square());
        }
        norm * N_OBS as f64 - R::sum(&quad) / (one_m_r2 * 2.0)
    }
}
