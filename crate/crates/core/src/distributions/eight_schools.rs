//! Product family for the non-centered eight-schools parameterization
//! `θ = (μ, τ, m̃₁..m̃₈)`: a normal for μ, a folded Student-t for τ and
//! Student-t marginals for the standardized effects.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use super::base::{folded_student_t_lpdf, normal_lpdf, student_t_lpdf, student_t_quantile};
use super::family::FamilyImpl;
use super::support::{Constraint, Support};
use crate::numeric::{Layout, Real};

pub const SCHOOLS: usize = 8;

/// Degrees of freedom `softplus(raw) + 1`, so always above one.
pub fn degrees_of_freedom<R: Real>(raw: R) -> R {
    raw.softplus() + 1.0
}

#[derive(Clone, Debug)]
pub struct EightSchoolsFamily {
    layout: Arc<Layout>,
    support: Support,
}

struct Blocks<'a, R> {
    mu_loc: R,
    mu_ls: R,
    tau_loc: R,
    tau_ls: R,
    tau_df: R,
    m_loc: &'a [R],
    m_ls: &'a [R],
    m_df: &'a [R],
}

impl Default for EightSchoolsFamily {
    fn default() -> Self {
        Self::new()
    }
}

impl EightSchoolsFamily {
    pub fn new() -> Self {
        let mut layout = Layout::new();
        layout.push("mu.loc", 1);
        layout.push("mu.log_scale", 1);
        layout.push("tau.loc", 1);
        layout.push("tau.log_scale", 1);
        layout.push("tau.df", 1);
        layout.push("m.loc", SCHOOLS);
        layout.push("m.log_scale", SCHOOLS);
        layout.push("m.df", SCHOOLS);
        let mut c = vec![Constraint::Real, Constraint::Positive];
        c.extend([Constraint::Real; SCHOOLS]);
        EightSchoolsFamily {
            layout: Arc::new(layout),
            support: Support::new(c),
        }
    }

    fn blocks<'a, R: Real>(&self, phi: &'a [R]) -> Blocks<'a, R> {
        let m = &phi[5..];
        Blocks {
            mu_loc: phi[0],
            mu_ls: phi[1],
            tau_loc: phi[2],
            tau_ls: phi[3],
            tau_df: phi[4],
            m_loc: &m[..SCHOOLS],
            m_ls: &m[SCHOOLS..2 * SCHOOLS],
            m_df: &m[2 * SCHOOLS..],
        }
    }
}

impl FamilyImpl for EightSchoolsFamily {
    fn dim(&self) -> usize {
        2 + SCHOOLS
    }
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }
    fn support(&self) -> &Support {
        &self.support
    }

    /// A standard normal for μ and uniforms feeding the Student-t quantiles.
    fn noise<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.dim());
        e.push(StandardNormal.sample(rng));
        e.extend((0..=SCHOOLS).map(|_| -> f64 { Open01.sample(rng) }));
        e
    }

    fn transform<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R> {
        let b = self.blocks(phi);
        let mut theta = Vec::with_capacity(self.dim());
        theta.push(b.mu_loc + b.mu_ls.exp() * eps[0]);
        let t = student_t_quantile(eps[1], degrees_of_freedom(b.tau_df));
        theta.push((b.tau_loc + b.tau_ls.exp() * t).abs());
        for i in 0..SCHOOLS {
            let t = student_t_quantile(eps[2 + i], degrees_of_freedom(b.m_df[i]));
            theta.push(b.m_loc[i] + b.m_ls[i].exp() * t);
        }
        theta
    }

    fn log_prob<R: Real>(&self, phi: &[R], theta: &[R]) -> R {
        let b = self.blocks(phi);
        let mut terms = Vec::with_capacity(self.dim());
        terms.push(normal_lpdf(theta[0], b.mu_loc, b.mu_ls.exp()));
        terms.push(folded_student_t_lpdf(
            theta[1],
            b.tau_loc,
            b.tau_ls.exp(),
            degrees_of_freedom(b.tau_df),
        ));
        for i in 0..SCHOOLS {
            terms.push(student_t_lpdf(
                theta[2 + i],
                b.m_loc[i],
                b.m_ls[i].exp(),
                degrees_of_freedom(b.m_df[i]),
            ));
        }
        R::sum(&terms)
    }
}
