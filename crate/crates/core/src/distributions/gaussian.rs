//! Gaussian families: mean-field and full-rank (Cholesky) normals.

use std::sync::Arc;

use super::base::{normal_lpdf, LN_2PI};
use super::family::FamilyImpl;
use super::support::Support;
use crate::numeric::{Layout, Real};

/// Independent normals; layout `loc (d)`, `log_scale (d)`.
#[derive(Clone, Debug)]
pub struct MeanFieldNormal {
    dim: usize,
    layout: Arc<Layout>,
    support: Support,
}

impl MeanFieldNormal {
    pub fn new(dim: usize) -> Self {
        let mut layout = Layout::new();
        layout.push("loc", dim);
        layout.push("log_scale", dim);
        MeanFieldNormal {
            dim,
            layout: Arc::new(layout),
            support: Support::real(dim),
        }
    }
}

impl FamilyImpl for MeanFieldNormal {
    fn dim(&self) -> usize {
        self.dim
    }
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }
    fn support(&self) -> &Support {
        &self.support
    }

    fn transform<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R> {
        let (loc, ls) = phi.split_at(self.dim);
        (0..self.dim).map(|i| loc[i] + ls[i].exp() * eps[i]).collect()
    }

    fn log_prob<R: Real>(&self, phi: &[R], theta: &[R]) -> R {
        let (loc, ls) = phi.split_at(self.dim);
        let terms: Vec<R> = (0..self.dim)
            .map(|i| normal_lpdf(theta[i], loc[i], ls[i].exp()))
            .collect();
        R::sum(&terms)
    }

    fn transform_with_log_prob<R: Real>(&self, phi: &[R], eps: &[f64]) -> (Vec<R>, R) {
        // log q(loc + σ ε) = Σ log N(ε) - Σ log σ
        let theta = self.transform(phi, eps);
        let ls = &phi[self.dim..];
        let base: f64 = eps.iter().map(|e| -0.5 * e * e - 0.5 * LN_2PI).sum();
        (theta, -R::sum(ls) + base)
    }
}

/// Correlated normal `θ = loc + L ε` with `L` lower triangular; layout
/// `loc (d)`, `log_diag (d)`, `offdiag (d(d-1)/2, row-major strict lower)`.
#[derive(Clone, Debug)]
pub struct FullRankNormal {
    dim: usize,
    layout: Arc<Layout>,
    support: Support,
}

impl FullRankNormal {
    pub fn new(dim: usize) -> Self {
        let mut layout = Layout::new();
        layout.push("loc", dim);
        layout.push("log_diag", dim);
        layout.push("offdiag", dim * dim.saturating_sub(1) / 2);
        FullRankNormal {
            dim,
            layout: Arc::new(layout),
            support: Support::real(dim),
        }
    }

    /// Row `i` of the strict lower triangle.
    fn row<'a, R>(&self, off: &'a [R], i: usize) -> &'a [R] {
        let start = i * (i - 1) / 2;
        &off[start..start + i]
    }
}

impl FamilyImpl for FullRankNormal {
    fn dim(&self) -> usize {
        self.dim
    }
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }
    fn support(&self) -> &Support {
        &self.support
    }

    fn transform<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R> {
        let d = self.dim;
        let (loc, rest) = phi.split_at(d);
        let (ld, off) = rest.split_at(d);
        let e: Vec<R> = eps.iter().map(|&v| R::cst(v)).collect();
        (0..d)
            .map(|i| {
                let diag = ld[i].exp() * eps[i];
                if i == 0 {
                    loc[i] + diag
                } else {
                    loc[i] + diag + R::dot(self.row(off, i), &e[..i])
                }
            })
            .collect()
    }

    fn log_prob<R: Real>(&self, phi: &[R], theta: &[R]) -> R {
        let d = self.dim;
        let (loc, rest) = phi.split_at(d);
        let (ld, off) = rest.split_at(d);
        // forward substitution for ε = L⁻¹ (θ - loc)
        let mut eps: Vec<R> = Vec::with_capacity(d);
        for i in 0..d {
            let mut r = theta[i] - loc[i];
            if i > 0 {
                r = r - R::dot(self.row(off, i), &eps);
            }
            eps.push(r / ld[i].exp());
        }
        let sq: Vec<R> = eps.iter().map(|e| e.square()).collect();
        R::sum(&sq) * -0.5 - R::sum(ld) - 0.5 * LN_2PI * d as f64
    }

    fn transform_with_log_prob<R: Real>(&self, phi: &[R], eps: &[f64]) -> (Vec<R>, R) {
        let theta = self.transform(phi, eps);
        let ld = &phi[self.dim..2 * self.dim];
        let base: f64 = eps.iter().map(|e| -0.5 * e * e - 0.5 * LN_2PI).sum();
        (theta, -R::sum(ld) + base)
    }
}
