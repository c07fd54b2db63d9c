//! The variational family enum and its sampling/density/gradient surface.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eight_schools::EightSchoolsFamily;
use super::flow::SplineFlow;
use super::garch::GarchFamily;
use super::gaussian::{FullRankNormal, MeanFieldNormal};
use super::support::Support;
use crate::descriptor::Descriptor;
use crate::error::{Error, Result};
use crate::numeric::autodiff::{constants, values};
use crate::numeric::{Layout, ParamVector, Real, RngKey, SampleMatrix, Tape};

/// What every concrete family provides. Densities are written once over
/// [`Real`]; `log_prob` is only called on support-interior θ.
pub(crate) trait FamilyImpl {
    fn dim(&self) -> usize;
    fn layout(&self) -> &Arc<Layout>;
    fn support(&self) -> &Support;

    /// Initial φ. Defaults to zeros (unit-scale, centered families).
    fn init_params(&self, _rng: &mut rand_chacha::ChaCha12Rng) -> Vec<f64> {
        vec![0.0; self.layout().len()]
    }

    /// Base noise for one draw.
    fn noise<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<f64> {
        (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// `θ = T_φ(ε)`.
    fn transform<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R>;

    fn log_prob<R: Real>(&self, phi: &[R], theta: &[R]) -> R;

    /// `(T_φ(ε), log q_φ(T_φ(ε)))`, differentiable in φ through both.
    fn transform_with_log_prob<R: Real>(&self, phi: &[R], eps: &[f64]) -> (Vec<R>, R) {
        let theta = self.transform(phi, eps);
        let lp = self.log_prob(phi, &theta);
        (theta, lp)
    }

    /// Rejects parameter values that realize invalid densities.
    fn check_params(&self, _phi: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// A parametric density `q_φ(θ)`.
#[derive(Clone, Debug)]
pub enum VariationalFamily {
    MeanFieldNormal(MeanFieldNormal),
    FullRankNormal(FullRankNormal),
    EightSchools(EightSchoolsFamily),
    SplineFlow(SplineFlow),
    Garch(GarchFamily),
}

macro_rules! dispatch {
    ($self:expr, $f:ident => $body:expr) => {
        match $self {
            VariationalFamily::MeanFieldNormal($f) => $body,
            VariationalFamily::FullRankNormal($f) => $body,
            VariationalFamily::EightSchools($f) => $body,
            VariationalFamily::SplineFlow($f) => $body,
            VariationalFamily::Garch($f) => $body,
        }
    };
}

/// A reparameterized draw with a handle for vector-Jacobian products.
pub struct PathwiseSample<'a> {
    pub theta: Vec<f64>,
    pub log_q: f64,
    family: &'a VariationalFamily,
    phi: Vec<f64>,
    eps: Vec<f64>,
}

impl PathwiseSample<'_> {
    /// φ-gradient of `⟨theta_cot, θ⟩ + logq_cot · log q_φ(θ)` with θ = T_φ(ε)
    /// and the noise ε held fixed.
    pub fn vjp(&self, theta_cot: &[f64], logq_cot: f64) -> Vec<f64> {
        let tape = Tape::new();
        let phi = tape.vars(&self.phi);
        let (theta, lq) = self.family.transform_with_log_prob_real(&phi, &self.eps);
        let mut seeds: Vec<_> = theta.into_iter().zip(theta_cot.iter().copied()).collect();
        seeds.push((lq, logq_cot));
        tape.gradient(&seeds, &phi)
    }

    pub fn noise(&self) -> &[f64] {
        &self.eps
    }
}

impl VariationalFamily {
    pub fn mean_field_normal(dim: usize) -> Self {
        VariationalFamily::MeanFieldNormal(MeanFieldNormal::new(dim))
    }

    pub fn full_rank_normal(dim: usize) -> Self {
        VariationalFamily::FullRankNormal(FullRankNormal::new(dim))
    }

    pub fn eight_schools() -> Self {
        VariationalFamily::EightSchools(EightSchoolsFamily::new())
    }

    pub fn spline_flow(layers: usize, bins: usize, hidden: usize) -> Self {
        VariationalFamily::SplineFlow(SplineFlow::new(5, 3.0, layers, bins, hidden))
    }

    pub fn garch() -> Self {
        VariationalFamily::Garch(GarchFamily::new())
    }

    /// Builds a family from a descriptor such as `mean-field-normal(dim=3)`.
    ///
    /// Recognized: `mean-field-normal(dim)`, `full-rank-normal(dim)`,
    /// `eight-schools-family`, `slcp-flow(layers=4, bins=8, hidden=32)`,
    /// `garch-family`.
    pub fn build(desc: &Descriptor) -> Result<Self> {
        let path = format!("family `{}`", desc.name);
        let dim = || -> Result<usize> {
            desc.get::<usize>("dim")?
                .filter(|d| *d >= 1)
                .ok_or_else(|| Error::config(&path, "`dim` ≥ 1 is required"))
        };
        match desc.name.as_str() {
            "mean-field-normal" => {
                desc.check_keys(&["dim"])?;
                Ok(Self::mean_field_normal(dim()?))
            }
            "full-rank-normal" => {
                desc.check_keys(&["dim"])?;
                Ok(Self::full_rank_normal(dim()?))
            }
            "eight-schools-family" => {
                desc.check_keys(&[])?;
                Ok(Self::eight_schools())
            }
            "slcp-flow" => {
                desc.check_keys(&["layers", "bins", "hidden"])?;
                let layers = desc.get_or("layers", 4usize)?;
                let bins = desc.get_or("bins", 8usize)?;
                let hidden = desc.get_or("hidden", 32usize)?;
                if layers == 0 || bins == 0 || hidden == 0 {
                    return Err(Error::config(path, "layers, bins and hidden must be positive"));
                }
                Ok(Self::spline_flow(layers, bins, hidden))
            }
            "garch-family" => {
                desc.check_keys(&[])?;
                Ok(Self::garch())
            }
            other => Err(Error::config("family", format!("unknown family `{other}`"))),
        }
    }

    /// As [`VariationalFamily::build`], additionally requiring the family
    /// support to equal `task_support`.
    pub fn build_for(desc: &Descriptor, task_support: &Support) -> Result<Self> {
        let fam = Self::build(desc)?;
        if fam.support() != task_support {
            return Err(Error::config(
                "family",
                format!(
                    "support of `{desc}` ({:?}) does not match the task support ({:?})",
                    fam.support().constraints(),
                    task_support.constraints()
                ),
            ));
        }
        Ok(fam)
    }

    pub fn descriptor(&self) -> String {
        match self {
            VariationalFamily::MeanFieldNormal(f) => format!("mean-field-normal(dim={})", f.dim()),
            VariationalFamily::FullRankNormal(f) => format!("full-rank-normal(dim={})", f.dim()),
            VariationalFamily::EightSchools(_) => "eight-schools-family".into(),
            VariationalFamily::SplineFlow(f) => f.descriptor(),
            VariationalFamily::Garch(_) => "garch-family".into(),
        }
    }

    pub fn dim(&self) -> usize {
        dispatch!(self, f => f.dim())
    }

    pub fn layout(&self) -> &Arc<Layout> {
        dispatch!(self, f => f.layout())
    }

    pub fn n_params(&self) -> usize {
        self.layout().len()
    }

    pub fn support(&self) -> &Support {
        dispatch!(self, f => f.support())
    }

    /// Initial parameters: unit scales, identity splines, zeroed
    /// conditioner output layers.
    pub fn init_params(&self, key: RngKey) -> ParamVector {
        let mut rng = key.rng();
        let v = dispatch!(self, f => f.init_params(&mut rng));
        ParamVector::new(self.layout().clone(), v).expect("initial parameters are finite")
    }

    fn validate(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: phi.len(),
            });
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            let block = self.layout().block_of(i).map_or("?", |b| b.name.as_str());
            return Err(Error::config(format!("phi.{block}"), "non-finite parameter"));
        }
        dispatch!(self, f => f.check_params(phi))
    }

    /// Base noise for draw `key`.
    pub fn noise(&self, key: RngKey) -> Vec<f64> {
        let mut rng = key.rng();
        dispatch!(self, f => f.noise(&mut rng))
    }

    pub fn transform_real<R: Real>(&self, phi: &[R], eps: &[f64]) -> Vec<R> {
        dispatch!(self, f => f.transform(phi, eps))
    }

    pub fn transform_with_log_prob_real<R: Real>(&self, phi: &[R], eps: &[f64]) -> (Vec<R>, R) {
        dispatch!(self, f => f.transform_with_log_prob(phi, eps))
    }

    /// log q at θ; `-inf` outside the support.
    pub fn log_prob_real<R: Real>(&self, phi: &[R], theta: &[R]) -> R {
        if !self.support().contains(&values(theta)) {
            return R::cst(f64::NEG_INFINITY);
        }
        dispatch!(self, f => f.log_prob(phi, theta))
    }

    pub fn log_prob(&self, phi: &ParamVector, theta: &[f64]) -> f64 {
        self.log_prob_real(phi.values(), theta)
    }

    /// `n` draws; draw `i` uses the noise of `key.fold_in(i)`.
    pub fn sample(&self, phi: &ParamVector, key: RngKey, n: usize) -> Result<SampleMatrix> {
        Ok(self.sample_with_log_prob(phi, key, n)?.0)
    }

    /// Draws together with their log-densities.
    pub fn sample_with_log_prob(
        &self,
        phi: &ParamVector,
        key: RngKey,
        n: usize,
    ) -> Result<(SampleMatrix, Vec<f64>)> {
        self.validate(phi.values())?;
        let mut data = Vec::with_capacity(n * self.dim());
        let mut lq = Vec::with_capacity(n);
        for i in 0..n {
            let eps = self.noise(key.fold_in(i as u64));
            let (theta, l) = self.transform_with_log_prob_real(phi.values(), &eps);
            data.extend(theta);
            lq.push(l);
        }
        Ok((SampleMatrix::new(self.dim(), data), lq))
    }

    /// `(log q_φ(θ), ∂/∂φ log q_φ(θ))` with θ held fixed.
    pub fn grad_params_log_prob(&self, phi: &ParamVector, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.validate(phi.values())?;
        let tape = Tape::new();
        let p = tape.vars(phi.values());
        let th: Vec<_> = constants(theta);
        let lq = self.log_prob_real(&p, &th);
        let g = tape.gradient(&[(lq, 1.0)], &p);
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            let block = self.layout().block_of(i).map_or("?".into(), |b| b.name.clone());
            return Err(Error::NonFiniteGradient { block });
        }
        Ok((lq.value(), g))
    }

    /// `(mean, covariance)` for the Gaussian families.
    pub fn gaussian(&self, phi: &ParamVector) -> Option<(nalgebra::DVector<f64>, nalgebra::DMatrix<f64>)> {
        use nalgebra::{DMatrix, DVector};
        let d = self.dim();
        let mean = DVector::from_column_slice(phi.block("loc")?);
        let cov = match self {
            VariationalFamily::MeanFieldNormal(_) => {
                DMatrix::from_diagonal(&DVector::from_iterator(d, phi.block("log_scale")?.iter().map(|s| (2.0 * s).exp())))
            }
            VariationalFamily::FullRankNormal(_) => {
                let mut l = DMatrix::zeros(d, d);
                for (i, s) in phi.block("log_diag")?.iter().enumerate() {
                    l[(i, i)] = s.exp();
                }
                let off = phi.block("offdiag")?;
                let mut k = 0;
                for i in 0..d {
                    for j in 0..i {
                        l[(i, j)] = off[k];
                        k += 1;
                    }
                }
                &l * l.transpose()
            }
            _ => return None,
        };
        Some((mean, cov))
    }

    /// One reparameterized draw `θ = T_φ(ε)`, ε fixed by `key`.
    pub fn sample_pathwise(&self, phi: &ParamVector, key: RngKey) -> Result<PathwiseSample<'_>> {
        self.validate(phi.values())?;
        let eps = self.noise(key);
        let (theta, log_q) = self.transform_with_log_prob_real(phi.values(), &eps);
        Ok(PathwiseSample {
            theta,
            log_q,
            family: self,
            phi: phi.values().to_vec(),
            eps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_counts_parameters() {
        let f = VariationalFamily::build(&Descriptor::parse("mean-field-normal(dim=51)").unwrap()).unwrap();
        let l = f.layout();
        assert_eq!(l.len(), 102);
        assert_eq!(l.block("loc").unwrap().len, 51);
        assert_eq!(l.block("log_scale").unwrap().len, 51);
    }

    #[test]
    fn slcp_flow_support_is_the_prior_box() {
        let f = VariationalFamily::build(&Descriptor::parse("slcp-flow").unwrap()).unwrap();
        assert_eq!(f.support(), &Support::boxed(5, -3.0, 3.0));
    }

    #[test]
    fn garch_conditions_beta_on_alphas() {
        let f = VariationalFamily::build(&Descriptor::parse("garch-family").unwrap()).unwrap();
        assert!(f.layout().block("beta1.conditioner").is_some());
        // moving α0 or α1 changes the β1 conditional once the conditioner
        // output layer is non-zero
        let mut phi = f.init_params(RngKey::new(1));
        let b = f.layout().block("beta1.conditioner").unwrap().range();
        for (j, v) in phi.values_mut()[b].iter_mut().enumerate() {
            *v += 0.05 * ((j % 7) as f64 - 3.0);
        }
        let a = f.log_prob(&phi, &[0.0, 0.2, 0.3, 0.4]);
        let c = f.log_prob(&phi, &[0.0, 0.5, 0.3, 0.4]);
        assert!((a - c).abs() > 1e-6);
    }

    #[test]
    fn unknown_and_mismatched_families_are_config_errors() {
        let d = Descriptor::parse("nope").unwrap();
        assert!(matches!(VariationalFamily::build(&d), Err(Error::Config { .. })));
        let d = Descriptor::parse("mean-field-normal(dim=5)").unwrap();
        assert!(matches!(
            VariationalFamily::build_for(&d, &Support::boxed(5, -3.0, 3.0)),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn normal_examples() {
        let f = VariationalFamily::mean_field_normal(1);
        let phi = f.init_params(RngKey::new(0));
        let lp = f.log_prob(&phi, &[0.0]);
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        // score at the mode, and one unit away
        let (_, g) = f.grad_params_log_prob(&phi, &[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
        let (_, g) = f.grad_params_log_prob(&phi, &[1.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        // θ = μ + σ ε: ∂θ/∂μ = 1, ∂θ/∂ log σ = σ ε
        let s = f.sample_pathwise(&phi, RngKey::new(3)).unwrap();
        let g = s.vjp(&[1.0], 0.0);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - s.noise()[0]).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_and_matches_moments() {
        let f = VariationalFamily::mean_field_normal(1);
        let mut phi = f.init_params(RngKey::new(0));
        phi.values_mut()[0] = 0.8;
        phi.values_mut()[1] = 0.5 * 0.8f64.ln();
        let a = f.sample(&phi, RngKey::new(9), 100_000).unwrap();
        let b = f.sample(&phi, RngKey::new(9), 100_000).unwrap();
        assert_eq!(a.data(), b.data());
        assert!((a.column_means()[0] - 0.8).abs() < 0.01);
    }

    #[test]
    fn full_rank_log_prob_matches_dense_formula() {
        use nalgebra::{DMatrix, DVector};
        let f = VariationalFamily::full_rank_normal(3);
        let phi_v = vec![0.1, -0.2, 0.3, 0.2, -0.1, 0.05, 0.4, -0.3, 0.25];
        let phi = ParamVector::new(f.layout().clone(), phi_v.clone()).unwrap();
        let l = DMatrix::from_row_slice(3, 3, &[
            0.2f64.exp(), 0.0, 0.0,
            0.4, (-0.1f64).exp(), 0.0,
            -0.3, 0.25, 0.05f64.exp(),
        ]);
        let cov = &l * l.transpose();
        let theta = [0.5, -1.0, 2.0];
        let r = DVector::from_column_slice(&theta) - DVector::from_column_slice(&phi_v[..3]);
        let q = r.dot(&(cov.clone().try_inverse().unwrap() * &r));
        let expect = -0.5 * q - 0.5 * cov.determinant().ln() - 1.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((f.log_prob(&phi, &theta) - expect).abs() < 1e-12);
        // sampling agrees with the density through transform_with_log_prob
        let (s, lq) = f.sample_with_log_prob(&phi, RngKey::new(2), 5).unwrap();
        for (row, l) in s.rows().zip(&lq) {
            assert!((f.log_prob(&phi, row) - l).abs() < 1e-12);
        }
    }
}
