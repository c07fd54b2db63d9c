//! Per-coordinate supports and the bijections to unconstrained space.

use serde::{Deserialize, Serialize};

use crate::numeric::Real;

/// Constraint on one coordinate of θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    Real,
    Positive,
    Interval { lower: f64, upper: f64 },
    /// `(0, 1 - θ[index])`; `index` precedes the constrained coordinate.
    ComplementOf { index: usize },
}

impl Constraint {
    /// Bounds of the coordinate given the preceding coordinates of θ.
    pub fn bounds(&self, theta: &[f64]) -> (f64, f64) {
        match *self {
            Constraint::Real => (f64::NEG_INFINITY, f64::INFINITY),
            Constraint::Positive => (0.0, f64::INFINITY),
            Constraint::Interval { lower, upper } => (lower, upper),
            Constraint::ComplementOf { index } => (0.0, 1.0 - theta[index]),
        }
    }

    /// Bounds that hold for every θ.
    pub fn outer_bounds(&self) -> (f64, f64) {
        match *self {
            Constraint::ComplementOf { .. } => (0.0, 1.0),
            c => c.bounds(&[]),
        }
    }
}

/// Support of a density on θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    constraints: Vec<Constraint>,
}

impl Support {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        for (j, c) in constraints.iter().enumerate() {
            match *c {
                Constraint::Interval { lower, upper } => {
                    assert!(lower < upper, "empty interval at coordinate {j}")
                }
                Constraint::ComplementOf { index } => {
                    assert!(index < j, "complement constraint must refer backwards")
                }
                _ => {}
            }
        }
        Support { constraints }
    }

    pub fn real(dim: usize) -> Self {
        Support::new(vec![Constraint::Real; dim])
    }

    pub fn boxed(dim: usize, lower: f64, upper: f64) -> Self {
        Support::new(vec![Constraint::Interval { lower, upper }; dim])
    }

    pub fn dim(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Strict interior membership.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self.constraints.iter().enumerate().all(|(j, c)| {
                let (lo, hi) = c.bounds(theta);
                let x = theta[j];
                x > lo && x < hi
            })
    }

    /// Outer bounding box.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.constraints.iter().map(Constraint::outer_bounds).collect()
    }

    /// Maps unconstrained `z` to θ; returns θ and `ln |det dθ/dz|`.
    pub fn constrain<R: Real>(&self, z: &[R]) -> (Vec<R>, R) {
        let mut theta: Vec<R> = Vec::with_capacity(z.len());
        let mut log_det = R::cst(0.0);
        for (j, (c, &zj)) in self.constraints.iter().zip(z).enumerate() {
            let x = match *c {
                Constraint::Real => zj,
                Constraint::Positive => {
                    log_det = log_det + zj;
                    zj.exp()
                }
                Constraint::Interval { lower, upper } => {
                    log_det = log_det + interval_log_det(zj) + (upper - lower).ln();
                    zj.sigmoid() * (upper - lower) + lower
                }
                Constraint::ComplementOf { index } => {
                    let width = -theta[index] + 1.0;
                    log_det = log_det + interval_log_det(zj) + width.ln();
                    zj.sigmoid() * width
                }
            };
            debug_assert!(j == theta.len());
            theta.push(x);
        }
        (theta, log_det)
    }

    /// Inverse of [`Support::constrain`].
    pub fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let (lo, hi) = c.bounds(theta);
                let x = theta[j];
                match c {
                    Constraint::Real => x,
                    Constraint::Positive => x.ln(),
                    _ => {
                        let p = (x - lo) / (hi - lo);
                        (p / (1.0 - p)).ln()
                    }
                }
            })
            .collect()
    }
}

/// `ln σ(z) + ln(1 - σ(z))`.
fn interval_log_det<R: Real>(z: R) -> R {
    -((-z).softplus() + z.softplus())
}
