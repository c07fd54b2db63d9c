//! Family for the GARCH(1,1) parameters `θ = (μ, α₀, α₁, β₁)`.
//!
//! μ is normal and α₀ log-normal. α₁ is a spline transform of a uniform on
//! `(0, 1)`. β₁ is another spline on `(0, 1)`, scaled by `1 - α₁`, whose
//! knots come from a dense conditioner fed `(ln α₀, α₁)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use super::base::{lognormal_lpdf, normal_lpdf};
use super::conditioner::Mlp;
use super::family::FamilyImpl;
use super::rqs::{raw_len, Spline};
use super::support::{Constraint, Support};
use crate::numeric::{Layout, Real};

pub const GARCH_BINS: usize = 8;
pub const GARCH_HIDDEN: usize = 32;

#[derive(Clone, Debug)]
pub struct GarchFamily {
    conditioner: Mlp,
    layout: Arc<Layout>,
    support: Support,
}

impl Default for GarchFamily {
    fn default() -> Self {
        Self::new()
    }
}

impl GarchFamily {
    pub fn new() -> Self {
        let k = raw_len(GARCH_BINS);
        let conditioner = Mlp::dense(2, GARCH_HIDDEN, k);
        let mut layout = Layout::new();
        layout.push("mu.loc", 1);
        layout.push("mu.log_scale", 1);
        layout.push("alpha0.loc", 1);
        layout.push("alpha0.log_scale", 1);
        layout.push("alpha1.spline", k);
        layout.push("beta1.conditioner", conditioner.n_params());
        GarchFamily {
            conditioner,
            layout: Arc::new(layout),
            support: Support::new(vec![
                Constraint::Real,
                Constraint::Positive,
                Constraint::Interval {
                    lower: 0.0,
                    upper: 1.0,
                },
                Constraint::ComplementOf { index: 2 },
            ]),
        }
    }

    fn alpha1_spline<R: Real>(&self, phi: &[R]) -> Spline<R> {
        Spline::from_raw(&phi[4..4 + raw_len(GARCH_BINS)], 0.0, 1.0)
    }

    /// Spline for β₁ / (1 - α₁) given the conditioning values.
    fn beta1_spline<R: Real>(&self, phi: &[R], alpha0: R, alpha1: R) -> Spline<R> {
        let p = &phi[4 + raw_len(GARCH_BINS)..];
        let knots = self.conditioner.forward(p, &[alpha0.ln(), alpha1]);
        Spline::from_raw(&knots, 0.0, 1.0)
    }
}

impl FamilyImpl for GarchFamily {
    fn dim(&self) -> usize {
        4
    }
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }
    fn support(&self) -> &Support {
        &self.support
    }

    fn init_params(&self, rng: &mut rand_chacha::ChaCha12Rng) -> Vec<f64> {
        let mut phi = vec![0.0; self.layout.len()];
        let start = 4 + raw_len(GARCH_BINS);
        self.conditioner.init(rng, &mut phi[start..]);
        phi
    }

    /// Two standard normals and two uniforms.
    fn noise<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<f64> {
        let n1: f64 = StandardNormal.sample(rng);
        let n2: f64 = StandardNormal.sample(rng);
        let u1: f64 = Open01.sample(rng);
        let u2: f64 = Open01.sample(rng);
        vec![n1, n2, u1, u2]
    }

    fn transform<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R> {
        let mu = phi[0] + phi[1].exp() * eps[0];
        let alpha0 = (phi[2] + phi[3].exp() * eps[1]).exp();
        let (alpha1, _) = self.alpha1_spline(phi).inverse(R::cst(eps[2]));
        let (v, _) = self.beta1_spline(phi, alpha0, alpha1).inverse(R::cst(eps[3]));
        let beta1 = (-alpha1 + 1.0) * v;
        vec![mu, alpha0, alpha1, beta1]
    }

    fn log_prob<R: Real>(&self, phi: &[R], theta: &[R]) -> R {
        let (mu, alpha0, alpha1, beta1) = (theta[0], theta[1], theta[2], theta[3]);
        let lp_mu = normal_lpdf(mu, phi[0], phi[1].exp());
        let lp_a0 = lognormal_lpdf(alpha0, phi[2], phi[3].exp());
        let (_, lp_a1) = self.alpha1_spline(phi).forward(alpha1);
        let width = -alpha1 + 1.0;
        let (_, ld_v) = self.beta1_spline(phi, alpha0, alpha1).forward(beta1 / width);
        R::sum(&[lp_mu, lp_a0, lp_a1, ld_v, -width.ln()])
    }
}
