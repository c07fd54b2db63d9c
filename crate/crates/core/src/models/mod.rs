//! Benchmark models: unnormalized log-joints, supports and observed data.

pub mod eight_schools;
pub mod garch;
pub mod linear_regression;
pub mod slcp;
pub mod toy_normal;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::descriptor::Descriptor;
use crate::distributions::base::BaseDensity;
use crate::distributions::{Constraint, Support};
use crate::error::{Error, Result};
use crate::numeric::autodiff::values;
use crate::numeric::{Real, RngKey, Tape};

pub use eight_schools::EightSchools;
pub use garch::Garch;
pub use linear_regression::LinearRegression;
pub use slcp::Slcp;
pub use toy_normal::ToyNormal;

#[derive(Clone, Debug)]
pub enum TaskKind {
    ToyNormal(ToyNormal),
    LinearRegression(LinearRegression),
    EightSchools(EightSchools),
    Slcp(Slcp),
    Garch(Garch),
}

/// A fixed probabilistic model with its observation.
#[derive(Clone, Debug)]
pub struct ModelTask {
    kind: TaskKind,
    support: Support,
    descriptor: String,
}

impl ModelTask {
    pub fn new(kind: TaskKind) -> Self {
        let (support, descriptor) = match &kind {
            TaskKind::ToyNormal(t) => (Support::real(t.dim()), format!("toy-normal(d={})", t.dim())),
            TaskKind::LinearRegression(t) => (
                Support::real(t.dim()),
                format!("linear-regression(p={}, n={})", t.p, t.n),
            ),
            TaskKind::EightSchools(_) => {
                let mut c = vec![Constraint::Real, Constraint::Positive];
                c.extend([Constraint::Real; 8]);
                (Support::new(c), "eight-schools".into())
            }
            TaskKind::Slcp(_) => (Support::boxed(5, -slcp::BOUND, slcp::BOUND), "slcp".into()),
            TaskKind::Garch(_) => (
                Support::new(vec![
                    Constraint::Real,
                    Constraint::Positive,
                    Constraint::Interval {
                        lower: 0.0,
                        upper: 1.0,
                    },
                    Constraint::ComplementOf { index: 2 },
                ]),
                "garch".into(),
            ),
        };
        ModelTask {
            kind,
            support,
            descriptor,
        }
    }

    /// Instantiates a task from `toy-normal(d)`, `linear-regression(p, n)`,
    /// `eight-schools`, `slcp` or `garch`. Linear regression and SLCP
    /// simulate their observations from `key`.
    pub fn make(desc: &Descriptor, key: RngKey) -> Result<Self> {
        let kind = match desc.name.as_str() {
            "toy-normal" => {
                desc.check_keys(&["d", "dim"])?;
                let d = desc.get::<usize>("d")?.or(desc.get::<usize>("dim")?).unwrap_or(1);
                if d == 0 {
                    return Err(Error::config("task.toy-normal.d", "dimension must be positive"));
                }
                TaskKind::ToyNormal(ToyNormal::new(d))
            }
            "linear-regression" => {
                desc.check_keys(&["p", "n"])?;
                let p = desc.get_or("p", 50usize)?;
                let n = desc.get_or("n", 200usize)?;
                if p == 0 {
                    return Err(Error::config("task.linear-regression.p", "need at least one covariate"));
                }
                TaskKind::LinearRegression(LinearRegression::simulate(p, n, key))
            }
            "eight-schools" => {
                desc.check_keys(&[])?;
                TaskKind::EightSchools(EightSchools::default())
            }
            "slcp" => {
                desc.check_keys(&[])?;
                TaskKind::Slcp(Slcp::simulate(key))
            }
            "garch" => {
                desc.check_keys(&[])?;
                TaskKind::Garch(Garch::default())
            }
            other => return Err(Error::config("task", format!("unknown task `{other}`"))),
        };
        Ok(Self::new(kind))
    }

    pub fn parse(s: &str, key: RngKey) -> Result<Self> {
        Self::make(&Descriptor::parse(s)?, key)
    }

    pub fn kind(&self) -> &TaskKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TaskKind::ToyNormal(_) => "toy-normal",
            TaskKind::LinearRegression(_) => "linear-regression",
            TaskKind::EightSchools(_) => "eight-schools",
            TaskKind::Slcp(_) => "slcp",
            TaskKind::Garch(_) => "garch",
        }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Whether the observation is re-simulated for each run seed.
    pub fn simulates_data(&self) -> bool {
        matches!(self.kind, TaskKind::LinearRegression(_) | TaskKind::Slcp(_))
    }

    /// Family used when a config asks for `auto`.
    pub fn default_family(&self) -> String {
        match self.kind {
            TaskKind::ToyNormal(_) | TaskKind::LinearRegression(_) => {
                format!("mean-field-normal(dim={})", self.dim())
            }
            TaskKind::EightSchools(_) => "eight-schools-family".into(),
            TaskKind::Slcp(_) => "slcp-flow(layers=4, bins=8, hidden=32)".into(),
            TaskKind::Garch(_) => "garch-family".into(),
        }
    }

    pub fn theta_names(&self) -> Vec<String> {
        match &self.kind {
            TaskKind::ToyNormal(_) => (0..self.dim()).map(|i| format!("theta{i}")).collect(),
            TaskKind::LinearRegression(t) => (0..t.p)
                .map(|i| format!("beta{i}"))
                .chain(std::iter::once("mu".into()))
                .collect(),
            TaskKind::EightSchools(_) => ["mu", "tau"]
                .iter()
                .map(|s| s.to_string())
                .chain((0..8).map(|i| format!("m_tilde{i}")))
                .collect(),
            TaskKind::Slcp(_) => (1..=5).map(|i| format!("theta{i}")).collect(),
            TaskKind::Garch(_) => ["mu", "alpha0", "alpha1", "beta1"].iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Prior log-density (unnormalized for improper priors); support-interior θ.
    pub fn log_prior_real<R: Real>(&self, theta: &[R]) -> R {
        match &self.kind {
            TaskKind::ToyNormal(t) => t.log_prior(theta),
            TaskKind::LinearRegression(t) => t.log_prior(theta),
            TaskKind::EightSchools(t) => t.log_prior(theta),
            TaskKind::Slcp(t) => R::cst(t.log_prior()),
            TaskKind::Garch(t) => t.log_prior(theta),
        }
    }

    pub fn log_likelihood_real<R: Real>(&self, theta: &[R]) -> R {
        match &self.kind {
            TaskKind::ToyNormal(t) => t.log_likelihood(theta),
            TaskKind::LinearRegression(t) => t.log_likelihood(theta),
            TaskKind::EightSchools(t) => t.log_likelihood(theta),
            TaskKind::Slcp(t) => t.log_likelihood(theta),
            TaskKind::Garch(t) => t.log_likelihood(theta),
        }
    }

    /// `log p(θ) + log p(x_obs | θ)`; `-inf` outside the support.
    pub fn log_joint_real<R: Real>(&self, theta: &[R]) -> R {
        if !self.support.contains(&values(theta)) {
            return R::cst(f64::NEG_INFINITY);
        }
        self.log_prior_real(theta) + self.log_likelihood_real(theta)
    }

    pub fn log_joint(&self, theta: &[f64]) -> f64 {
        self.log_joint_real(theta)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        if !self.support.contains(theta) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood_real(theta)
    }

    /// `(log p(θ, x_obs), ∂/∂θ log p(θ, x_obs))` at a support-interior θ.
    pub fn grad_theta_log_joint(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        for (j, c) in self.support.constraints().iter().enumerate() {
            let (lo, hi) = c.bounds(theta);
            if !(theta[j] > lo && theta[j] < hi) {
                return Err(Error::SupportBoundary { coordinate: j });
            }
        }
        let tape = Tape::new();
        let t = tape.vars(theta);
        let lp = self.log_joint_real(&t);
        let g = tape.gradient(&[(lp, 1.0)], &t);
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate { coordinate: j });
        }
        Ok((lp.value(), g))
    }

    /// A draw from the prior, if the prior is proper.
    pub fn sample_prior<G: Rng + ?Sized>(&self, rng: &mut G) -> Option<Vec<f64>> {
        fn normal<G: Rng + ?Sized>(rng: &mut G, s: f64) -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        }
        match &self.kind {
            TaskKind::ToyNormal(t) => Some((0..t.dim()).map(|_| normal(rng, toy_normal::PRIOR_SCALE)).collect()),
            TaskKind::LinearRegression(t) => Some((0..t.dim()).map(|_| normal(rng, 1.0)).collect()),
            TaskKind::EightSchools(_) => {
                let mu = normal(rng, eight_schools::MU_SCALE);
                let tau = BaseDensity::HalfCauchy {
                    scale: eight_schools::TAU_SCALE,
                }
                .sample(rng);
                let mut th = vec![mu, tau];
                th.extend((0..8).map(|_| normal(rng, 1.0)));
                Some(th)
            }
            TaskKind::Slcp(_) => Some((0..5).map(|_| rng.random_range(-slcp::BOUND..slcp::BOUND)).collect()),
            TaskKind::Garch(_) => None,
        }
    }

    /// Exact Gaussian posterior `(mean, covariance)` for conjugate tasks.
    pub fn gaussian_posterior(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        match &self.kind {
            TaskKind::ToyNormal(t) => {
                let (m, v) = t.posterior_mean_var();
                let d = m.len();
                Some((DVector::from_vec(m), DMatrix::identity(d, d) * v))
            }
            TaskKind::LinearRegression(t) => Some(t.posterior()),
            _ => None,
        }
    }

    /// Observation and hyperparameters, for auditing.
    pub fn to_json(&self) -> serde_json::Value {
        let data = match &self.kind {
            TaskKind::ToyNormal(t) => serde_json::to_value(t),
            TaskKind::LinearRegression(t) => serde_json::to_value(t),
            TaskKind::EightSchools(t) => serde_json::to_value(t),
            TaskKind::Slcp(t) => serde_json::to_value(t),
            TaskKind::Garch(t) => serde_json::to_value(t),
        }
        .expect("task data serializes");
        serde_json::json!({
            "task": self.descriptor,
            "dim": self.dim(),
            "theta_names": self.theta_names(),
            "support": self.support,
            "data": data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_diff_grad;
    use std::f64::consts::PI;

    fn key() -> RngKey {
        RngKey::new(42)
    }

    #[test]
    fn toy_normal_log_joint_by_hand() {
        let t = ModelTask::parse("toy-normal(d=1)", key()).unwrap();
        let expect = -0.5 * (8.0 * PI).ln() - 0.5 * (2.0 * PI).ln() - 0.5;
        assert!((t.log_joint(&[0.0]) - expect).abs() < 1e-14);
    }

    #[test]
    fn toy_normal_gradient_by_hand() {
        let t = ModelTask::parse("toy-normal(d=3)", key()).unwrap();
        let th = [0.3, -1.0, 2.0];
        let (_, g) = t.grad_theta_log_joint(&th).unwrap();
        for (gi, ti) in g.iter().zip(&th) {
            assert!((gi - (-ti / 4.0 + (1.0 - ti))).abs() < 1e-14);
        }
        let x = match t.kind() {
            TaskKind::ToyNormal(tn) => tn.x_obs.clone(),
            _ => unreachable!(),
        };
        assert_eq!(x, vec![1.0; 3]);
    }

    #[test]
    fn toy_normal_fifty_dims_observes_ones() {
        let t = ModelTask::parse("toy-normal(d=50)", key()).unwrap();
        assert_eq!(t.dim(), 50);
        let TaskKind::ToyNormal(tn) = t.kind() else { unreachable!() };
        assert_eq!(tn.x_obs, vec![1.0; 50]);
        let (m, v) = tn.posterior_mean_var();
        assert!(m.iter().all(|&x| (x - 0.8).abs() < 1e-15));
        assert!((v - 0.8).abs() < 1e-15);
    }

    #[test]
    fn linear_regression_at_zero() {
        let t = ModelTask::parse("linear-regression(p=50, n=200)", key()).unwrap();
        let TaskKind::LinearRegression(lr) = t.kind() else { unreachable!() };
        assert_eq!(lr.x.len(), 200 * 50);
        let theta = vec![0.0; 51];
        let prior = -(51.0 / 2.0) * (2.0 * PI).ln();
        let lik: f64 = lr.y.iter().map(|y| -0.5 * (2.0 * PI).ln() - 0.5 * y * y).sum();
        assert!((t.log_joint(&theta) - (prior + lik)).abs() < 1e-9);
    }

    #[test]
    fn linear_regression_gradient_vanishes_at_map() {
        let t = ModelTask::parse("linear-regression(p=10, n=40)", key()).unwrap();
        let (mean, _) = t.gaussian_posterior().unwrap();
        let (_, g) = t.grad_theta_log_joint(mean.as_slice()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
    }

    #[test]
    fn garch_degenerates_to_iid_normal() {
        let t = ModelTask::parse("garch", key()).unwrap();
        let TaskKind::Garch(g) = t.kind() else { unreachable!() };
        assert_eq!(g.x_obs.len(), 200);
        // α₁ = β₁ = 0 is a boundary point of the support, so compare the
        // likelihood directly
        let theta = [0.1, 0.7, 0.0, 0.0];
        let lik = t.log_likelihood_real(&theta[..]);
        let iid: f64 = g.x_obs.iter().map(|&x| BaseDensity::Normal { loc: 0.1, scale: 0.7f64.sqrt() }.log_prob(x)).sum();
        assert!((lik - iid).abs() < 1e-9);
    }

    #[test]
    fn garch_recursion_matches_hand_rolled_loop() {
        let t = ModelTask::parse("garch", key()).unwrap();
        let TaskKind::Garch(g) = t.kind() else { unreachable!() };
        let th = [0.03, 0.2, 0.25, 0.4];
        let x = &g.x_obs;
        let mut sig2 = vec![0.0; x.len() + 1];
        sig2[0] = 0.25;
        let mut lik = 0.0;
        for s in 1..=x.len() {
            let prev = if s == 1 { x[0] } else { x[s - 2] };
            sig2[s] = th[1] + th[2] * (prev - th[0]) * (prev - th[0]) + th[3] * sig2[s - 1];
            lik += -0.5 * (2.0 * PI * sig2[s]).ln() - 0.5 * (x[s - 1] - th[0]).powi(2) / sig2[s];
        }
        assert_eq!(g.variances(&th), sig2[1..].to_vec());
        let prior = -(1.0f64 - 0.25).ln();
        assert!((t.log_joint(&th) - (prior + lik)).abs() < 1e-10);
    }

    #[test]
    fn eight_schools_centered_and_noncentered_agree() {
        let t = ModelTask::parse("eight-schools", key()).unwrap();
        let TaskKind::EightSchools(es) = t.kind() else { unreachable!() };
        let mut rng = RngKey::new(7).rng();
        for _ in 0..50 {
            let mu: f64 = rng.random_range(-10.0..10.0);
            let tau: f64 = rng.random_range(0.01..20.0);
            let mt: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m: Vec<f64> = mt.iter().map(|z| mu + tau * z).collect();
            let mut th = vec![mu, tau];
            th.extend(&mt);
            // dm/dm̃ = τ per school
            let nc = t.log_joint(&th);
            let c = es.centered_log_joint(mu, tau, &m) + 8.0 * tau.ln();
            assert!((nc - c).abs() < 1e-10);
        }
    }

    #[test]
    fn slcp_reflection_symmetry() {
        let t = ModelTask::parse("slcp", key()).unwrap();
        assert_eq!(t.support(), &Support::boxed(5, -3.0, 3.0));
        let TaskKind::Slcp(s) = t.kind() else { unreachable!() };
        assert_eq!(s.x_obs.len(), 8);
        let th = [0.5, -1.0, 1.2, -0.7, 0.4];
        let base = t.log_joint(&th);
        for (a, b) in [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let r = [th[0], th[1], a * th[2], b * th[3], th[4]];
            assert!((t.log_joint(&r) - base).abs() < 1e-8);
        }
    }

    #[test]
    fn slcp_likelihood_matches_dense_bivariate_normal() {
        let t = ModelTask::parse("slcp", key()).unwrap();
        let TaskKind::Slcp(s) = t.kind() else { unreachable!() };
        let th = [0.5, -1.0, 1.2, -0.7, 0.4];
        let (s1, s2, r) = (th[2] * th[2], th[3] * th[3], f64::tanh(th[4]));
        let cov = DMatrix::from_row_slice(2, 2, &[s1 * s1, r * s1 * s2, r * s1 * s2, s2 * s2]);
        let inv = cov.clone().try_inverse().unwrap();
        let mut lik = 0.0;
        for j in 0..4 {
            let d = DVector::from_vec(vec![s.x_obs[2 * j] - th[0], s.x_obs[2 * j + 1] - th[1]]);
            lik += -(2.0 * PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * d.dot(&(&inv * &d));
        }
        assert!((t.log_likelihood(&th) - lik).abs() < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngKey::new(3).rng();
        for name in ["toy-normal(d=4)", "linear-regression(p=5, n=30)", "eight-schools", "slcp", "garch"] {
            let t = ModelTask::parse(name, key()).unwrap();
            for _ in 0..100 {
                let z: Vec<f64> = (0..t.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
                let (th, _) = t.support().constrain(&z);
                let (_, g) = t.grad_theta_log_joint(&th).unwrap();
                let fd = finite_diff_grad(|x| t.log_joint(x), &th, 1e-6).unwrap();
                let scale = g.iter().chain(&fd).fold(1e-3f64, |m, v| m.max(v.abs()));
                let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(err / scale < 1e-4, "{name}: {err} / {scale} at {th:?}");
            }
        }
    }

    #[test]
    fn boundary_gradient_is_an_error() {
        let t = ModelTask::parse("garch", key()).unwrap();
        assert!(matches!(
            t.grad_theta_log_joint(&[0.0, 0.1, 0.0, 0.2]),
            Err(Error::SupportBoundary { coordinate: 2 })
        ));
        assert_eq!(t.log_joint(&[0.0, 0.1, 0.5, 0.6]), f64::NEG_INFINITY);
    }

    #[test]
    fn unknown_task_is_a_config_error() {
        assert!(matches!(ModelTask::parse("nope", key()), Err(Error::Config { .. })));
    }
}
