//! Bayesian linear regression `y ~ N(X β + μ, 1)` with standard normal
//! priors on β and μ; θ = (β₁..β_p, μ).

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::distributions::base::{normal_lpdf, LN_2PI};
use crate::numeric::{Real, RngKey};

#[derive(Clone, Debug, Serialize)]
pub struct LinearRegression {
    pub p: usize,
    pub n: usize,
    /// Row-major `n × p` design.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Parameters the data were simulated from.
    pub theta_true: Vec<f64>,
}

impl LinearRegression {
    /// Simulates a design, a parameter from the prior and responses.
    pub fn simulate(p: usize, n: usize, key: RngKey) -> Self {
        let mut rng = key.rng();
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let x: Vec<f64> = (0..n * p).map(|_| z()).collect();
        let theta_true: Vec<f64> = (0..=p).map(|_| z()).collect();
        let y = (0..n)
            .map(|i| {
                let row = &x[i * p..(i + 1) * p];
                let m: f64 = row.iter().zip(&theta_true).map(|(a, b)| a * b).sum::<f64>() + theta_true[p];
                m + z()
            })
            .collect();
        LinearRegression {
            p,
            n,
            x,
            y,
            theta_true,
        }
    }

    pub fn dim(&self) -> usize {
        self.p + 1
    }

    pub fn log_prior<R: Real>(&self, theta: &[R]) -> R {
        let sq: Vec<R> = theta.iter().map(|t| t.square()).collect();
        R::sum(&sq) * -0.5 - 0.5 * LN_2PI * theta.len() as f64
    }

    pub fn log_likelihood<R: Real>(&self, theta: &[R]) -> R {
        if self.n == 0 {
            return R::cst(0.0);
        }
        let (beta, mu) = theta.split_at(self.p);
        let terms: Vec<R> = (0..self.n)
            .map(|i| {
                let row: Vec<R> = self.x[i * self.p..(i + 1) * self.p].iter().map(|&v| R::cst(v)).collect();
                let m = R::dot(&row, beta) + mu[0];
                normal_lpdf(R::cst(self.y[i]), m, R::cst(1.0))
            })
            .collect();
        R::sum(&terms)
    }

    /// Exact Gaussian posterior `(mean, covariance)`: precision `ZᵀZ + I`
    /// with `Z = [X, 1]`.
    pub fn posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut z = DMatrix::zeros(self.n, d);
        for i in 0..self.n {
            for j in 0..self.p {
                z[(i, j)] = self.x[i * self.p + j];
            }
            z[(i, self.p)] = 1.0;
        }
        let precision = z.transpose() * &z + DMatrix::identity(d, d);
        let chol = precision.cholesky().expect("posterior precision is positive definite");
        let rhs = z.transpose() * DVector::from_column_slice(&self.y);
        let mean = chol.solve(&rhs);
        (mean, chol.inverse())
    }
}
