//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::params::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            config,
        }
    }

    /// In-place update of `params` with gradient `g`.
    pub fn step(&mut self, params: &mut [f64], g: &[f64]) -> Result<()> {
        if g.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: g.len(),
            });
        }
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                step: self.t as usize,
                reason: format!("non-finite gradient at coordinate {i}"),
            });
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, &gi), m), v) in params.iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Pure form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    params: &ParamVector,
    g: &[f64],
) -> Result<(AdamState, ParamVector)> {
    let mut next = state.clone();
    let mut p = params.clone();
    next.step(p.values_mut(), g)?;
    Ok((next, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::params::Layout;
    use std::sync::Arc;

    fn one(len: usize, v: f64) -> ParamVector {
        let mut l = Layout::new();
        l.push("x", len);
        ParamVector::new(Arc::new(l), vec![v; len]).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let p = one(3, 0.7);
        let s = AdamState::new(3, AdamConfig::default());
        let (_, q) = adam_step(&s, &p, &[0.0; 3]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let p = one(1, 0.0);
        let cfg = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let (s, q) = adam_step(&AdamState::new(1, cfg), &p, &[1.0]).unwrap();
        // m = 0.1, v = 0.001, both bias-corrected to 1
        assert!((q.values()[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(2, cfg);
        let mut p = vec![0.0, 0.0];
        let mut last = p.clone();
        for _ in 0..2000 {
            last.copy_from_slice(&p);
            s.step(&mut p, &[3.0, -0.01]).unwrap();
        }
        for (a, b) in p.iter().zip(&last) {
            assert!(((a - b).abs() - cfg.lr).abs() < 1e-6 * cfg.lr + 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let p = one(2, 0.3);
        let s = AdamState::new(2, AdamConfig::default());
        let a = adam_step(&s, &p, &[0.2, -1.5]).unwrap();
        let b = adam_step(&s, &p, &[0.2, -1.5]).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.values(), b.1.values());
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let p = one(1, 0.0);
        let mut s = AdamState::new(1, AdamConfig::default());
        s.t = 41;
        let err = adam_step(&s, &p, &[f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 41, .. }));
    }
}
