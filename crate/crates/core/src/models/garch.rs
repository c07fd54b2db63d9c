//! GARCH(1,1) with a constant mean: `x_t ~ N(μ, σ_t²)`,
//! `σ_t² = α₀ + α₁ (x_{t-1} - μ)² + β₁ σ_{t-1}²`, `σ₀² = 0.25`, `x₀ = x₁`.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::distributions::base::normal_lpdf;
use crate::numeric::{Real, RngKey};

pub const SERIES_LEN: usize = 200;
pub const SIGMA0_SQ: f64 = 0.25;
/// Parameters the bundled series was simulated from.
pub const TRUE_PARAMS: [f64; 4] = [0.05, 0.1, 0.3, 0.5];
const DATA_SEED: u64 = 2011;

#[derive(Clone, Debug, Serialize)]
pub struct Garch {
    pub x_obs: Vec<f64>,
}

impl Default for Garch {
    fn default() -> Self {
        Garch {
            x_obs: Self::simulate(&TRUE_PARAMS, SERIES_LEN, RngKey::new(DATA_SEED)),
        }
    }
}

impl Garch {
    pub fn simulate(theta: &[f64], len: usize, key: RngKey) -> Vec<f64> {
        let (mu, a0, a1, b1) = (theta[0], theta[1], theta[2], theta[3]);
        let mut rng = key.rng();
        let mut var = SIGMA0_SQ;
        let mut prev = mu;
        (0..len)
            .map(|_| {
                var = a0 + a1 * (prev - mu).powi(2) + b1 * var;
                let z: f64 = StandardNormal.sample(&mut rng);
                prev = mu + var.sqrt() * z;
                prev
            })
            .collect()
    }

    /// α₁ ~ U(0, 1) and β₁ ~ U(0, 1 - α₁); μ and α₀ are flat.
    pub fn log_prior<R: Real>(&self, theta: &[R]) -> R {
        -(-theta[2] + 1.0).ln()
    }

    pub fn log_likelihood<R: Real>(&self, theta: &[R]) -> R {
        let (mu, a0, a1, b1) = (theta[0], theta[1], theta[2], theta[3]);
        let mut var = R::cst(SIGMA0_SQ);
        let mut prev = self.x_obs[0];
        let mut terms = Vec::with_capacity(self.x_obs.len());
        for &x in &self.x_obs {
            var = a0 + a1 * (-mu + prev).square() + b1 * var;
            terms.push(normal_lpdf(R::cst(x), mu, var.sqrt()));
            prev = x;
        }
        R::sum(&terms)
    }

    /// The variance sequence σ₁², …, σ_T².
    pub fn variances(&self, theta: &[f64]) -> Vec<f64> {
        let mut var = SIGMA0_SQ;
        let mut prev = self.x_obs[0];
        self.x_obs
            .iter()
            .map(|&x| {
                var = theta[1] + theta[2] * (prev - theta[0]).powi(2) + theta[3] * var;
                prev = x;
                var
            })
            .collect()
    }
}
