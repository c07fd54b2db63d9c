//! The eight-schools hierarchical model in non-centered form,
//! `θ = (μ, τ, m̃₁..m̃₈)` with school effects `m = μ + τ m̃`.

use serde::Serialize;

use crate::distributions::base::{half_cauchy_lpdf, normal_lpdf};
use crate::numeric::Real;

/// Classic data set (Rubin, 1981): estimated effects and standard errors.
pub const EFFECTS: [f64; 8] = [28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0];
pub const STD_ERRORS: [f64; 8] = [15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0];

pub const MU_SCALE: f64 = 5.0;
pub const TAU_SCALE: f64 = 5.0;

#[derive(Clone, Debug, Serialize)]
pub struct EightSchools {
    pub effects: [f64; 8],
    pub std_errors: [f64; 8],
}

impl Default for EightSchools {
    fn default() -> Self {
        EightSchools {
            effects: EFFECTS,
            std_errors: STD_ERRORS,
        }
    }
}

impl EightSchools {
    pub fn log_prior<R: Real>(&self, theta: &[R]) -> R {
        let mut t = vec![
            normal_lpdf(theta[0], R::cst(0.0), R::cst(MU_SCALE)),
            half_cauchy_lpdf(theta[1], R::cst(TAU_SCALE)),
        ];
        t.extend(theta[2..].iter().map(|&m| normal_lpdf(m, R::cst(0.0), R::cst(1.0))));
        R::sum(&t)
    }

    pub fn log_likelihood<R: Real>(&self, theta: &[R]) -> R {
        let (mu, tau) = (theta[0], theta[1]);
        let t: Vec<R> = (0..8)
            .map(|i| normal_lpdf(R::cst(self.effects[i]), mu + tau * theta[2 + i], R::cst(self.std_errors[i])))
            .collect();
        R::sum(&t)
    }

    /// Log-joint in the centered parameterization `(μ, τ, m)`.
    pub fn centered_log_joint(&self, mu: f64, tau: f64, m: &[f64]) -> f64 {
        let mut lp = normal_lpdf(mu, 0.0, MU_SCALE) + half_cauchy_lpdf(tau, TAU_SCALE);
        for ((&mi, &y), &se) in m.iter().zip(&self.effects).zip(&self.std_errors) {
            lp += normal_lpdf(mi, mu, tau) + normal_lpdf(y, mi, se);
        }
        lp
    }
}
