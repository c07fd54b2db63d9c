//! Base densities, written against [`Real`] so their parameters can be
//! differentiated.

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::numeric::Real;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_PI: f64 = 1.144_729_885_849_400_2;

pub fn normal_lpdf<R: Real>(x: R, loc: R, scale: R) -> R {
    let z = (x - loc) / scale;
    z.square() * -0.5 - scale.ln() - 0.5 * LN_2PI
}

pub fn student_t_lpdf<R: Real>(x: R, loc: R, scale: R, df: R) -> R {
    let z = (x - loc) / scale;
    let half = (df + 1.0) * 0.5;
    half.ln_gamma() - (df * 0.5).ln_gamma() - (df.ln() + LN_PI) * 0.5 - scale.ln()
        - half * (z.square() / df).ln_1p()
}

/// Density of `|X|`, `X ~ StudentT(loc, scale, df)`, at `x > 0`.
pub fn folded_student_t_lpdf<R: Real>(x: R, loc: R, scale: R, df: R) -> R {
    log_add_exp(
        student_t_lpdf(x, loc, scale, df),
        student_t_lpdf(-x, loc, scale, df),
    )
}

pub fn half_cauchy_lpdf<R: Real>(x: R, scale: R) -> R {
    -(x / scale).square().ln_1p() - scale.ln() + (std::f64::consts::LN_2 - LN_PI)
}

pub fn lognormal_lpdf<R: Real>(x: R, loc: R, scale: R) -> R {
    let lx = x.ln();
    normal_lpdf(lx, loc, scale) - lx
}

pub fn log_add_exp<R: Real>(a: R, b: R) -> R {
    let (hi, lo) = if a.value() >= b.value() { (a, b) } else { (b, a) };
    if hi.value() == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// CDF of the standard Student-t.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn std_t_pdf(t: f64, df: f64) -> f64 {
    student_t_lpdf(t, 0.0, 1.0, df).exp()
}

fn lower_tail_quantile(u: f64, df: f64) -> f64 {
    debug_assert!(u > 0.0 && u <= 0.5);
    if u == 0.5 {
        return 0.0;
    }
    // lower tail mass 0.5 I_x(df/2, 1/2), monotone in t < 0
    let tail = |t: f64| 0.5 * beta_reg(0.5 * df, 0.5, df / (df + t * t));
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
    let mut t = z + (z * z * z + z) / (4.0 * df);
    let mut hi = 0.0;
    let mut lo = t.min(-1.0);
    while tail(lo) > u {
        hi = lo;
        lo *= 2.0;
    }
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = tail(t) - u;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - f / std_t_pdf(t, df);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - t).abs() <= 1e-15 * (1.0 + t.abs());
        t = next;
        if done {
            break;
        }
    }
    t
}

/// Quantile of the standard Student-t at `u ∈ (0, 1)`, differentiable in
/// the degrees of freedom by the implicit function theorem.
pub fn student_t_quantile<R: Real>(u: f64, df: R) -> R {
    let nu = df.value();
    let t = if u <= 0.5 {
        lower_tail_quantile(u, nu)
    } else {
        -lower_tail_quantile(1.0 - u, nu)
    };
    if !df.is_recorded() {
        return R::lift(t, &[]);
    }
    // dt/dν = -(∂F/∂ν) / f(t)
    let h = 1e-5 * nu.max(1.0);
    let dfdnu = (student_t_cdf(t, nu + h) - student_t_cdf(t, nu - h)) / (2.0 * h);
    let slope = -dfdnu / std_t_pdf(t, nu);
    R::lift(t, &[(df, slope)])
}

/// A density with fixed parameters, used for priors and data generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseDensity {
    Normal { loc: f64, scale: f64 },
    StudentT { loc: f64, scale: f64, df: f64 },
    FoldedStudentT { loc: f64, scale: f64, df: f64 },
    HalfCauchy { scale: f64 },
    LogNormal { loc: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl BaseDensity {
    /// Validates parameters.
    pub fn new(d: BaseDensity) -> Result<Self> {
        let bad = |m: &str| Err(Error::config("base-density", m.to_string()));
        match d {
            BaseDensity::Normal { scale, .. }
            | BaseDensity::LogNormal { scale, .. }
            | BaseDensity::HalfCauchy { scale }
                if !(scale > 0.0 && scale.is_finite()) =>
            {
                bad("scale must be positive")
            }
            BaseDensity::StudentT { scale, df, .. } | BaseDensity::FoldedStudentT { scale, df, .. }
                if !(scale > 0.0 && df > 0.0) =>
            {
                bad("scale and degrees of freedom must be positive")
            }
            BaseDensity::Uniform { lower, upper }
                if !(lower.is_finite() && upper.is_finite() && lower < upper) =>
            {
                bad("uniform bounds must be finite and ordered")
            }
            _ => Ok(d),
        }
    }

    pub fn log_prob(&self, x: f64) -> f64 {
        match *self {
            BaseDensity::Normal { loc, scale } => normal_lpdf(x, loc, scale),
            BaseDensity::StudentT { loc, scale, df } => student_t_lpdf(x, loc, scale, df),
            BaseDensity::FoldedStudentT { loc, scale, df } if x > 0.0 => {
                folded_student_t_lpdf(x, loc, scale, df)
            }
            BaseDensity::HalfCauchy { scale } if x > 0.0 => half_cauchy_lpdf(x, scale),
            BaseDensity::LogNormal { loc, scale } if x > 0.0 => lognormal_lpdf(x, loc, scale),
            BaseDensity::Uniform { lower, upper } if x > lower && x < upper => {
                -(upper - lower).ln()
            }
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> f64 {
        let n = |rng: &mut G| -> f64 { StandardNormal.sample(rng) };
        let u = |rng: &mut G| -> f64 { Open01.sample(rng) };
        match *self {
            BaseDensity::Normal { loc, scale } => loc + scale * n(rng),
            BaseDensity::StudentT { loc, scale, df } => loc + scale * student_t_quantile(u(rng), df),
            BaseDensity::FoldedStudentT { loc, scale, df } => {
                (loc + scale * student_t_quantile(u(rng), df)).abs()
            }
            BaseDensity::HalfCauchy { scale } => scale * (0.5 * std::f64::consts::PI * u(rng)).tan(),
            BaseDensity::LogNormal { loc, scale } => (loc + scale * n(rng)).exp(),
            BaseDensity::Uniform { lower, upper } => lower + (upper - lower) * u(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::autodiff::gradient;
    use crate::numeric::RngKey;

    /// Trapezoid rule on a fine grid.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..n {
            s += f(a + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn standard_normal_at_zero() {
        assert!((normal_lpdf(0.0, 0.0, 1.0) + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn folded_t_is_reflection_sum() {
        // loc 0: folded density = 2 t(x)
        for &x in &[0.1, 1.0, 3.7] {
            let f = folded_student_t_lpdf(x, 0.0, 1.3, 4.5);
            let t = student_t_lpdf(x, 0.0, 1.3, 4.5);
            assert!((f - (2f64.ln() + t)).abs() < 1e-13);
        }
        // integrates to one over (0, ∞) for a shifted location
        let d = BaseDensity::FoldedStudentT { loc: 0.8, scale: 1.1, df: 5.0 };
        let mass = integrate(|x| d.log_prob(x.max(1e-300)).exp(), 1e-12, 400.0, 400_000);
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    }

    #[test]
    fn densities_normalize() {
        let cases = [
            (BaseDensity::Normal { loc: 0.3, scale: 0.7 }, -10.0, 10.0),
            (BaseDensity::StudentT { loc: -1.0, scale: 2.0, df: 30.0 }, -200.0, 200.0),
            (BaseDensity::LogNormal { loc: 0.1, scale: 0.4 }, 1e-9, 40.0),
            (BaseDensity::Uniform { lower: -3.0, upper: 3.0 }, -3.0 + 1e-12, 3.0 - 1e-12),
        ];
        for (d, a, b) in cases {
            let mass = integrate(|x| d.log_prob(x).exp(), a, b, 200_000);
            assert!((mass - 1.0).abs() < 1e-4, "{d:?}: {mass}");
        }
        // half-Cauchy: closed-form CDF 2/π atan(x/s)
        let hc = BaseDensity::HalfCauchy { scale: 5.0 };
        let mass = integrate(|x| hc.log_prob(x.max(1e-300)).exp(), 1e-12, 50.0, 200_000);
        let exact = 2.0 / std::f64::consts::PI * (50.0f64 / 5.0).atan();
        assert!((mass - exact).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(BaseDensity::new(BaseDensity::Normal { loc: 0.0, scale: 0.0 }).is_err());
        assert!(BaseDensity::new(BaseDensity::StudentT { loc: 0.0, scale: 1.0, df: -1.0 }).is_err());
        assert!(BaseDensity::new(BaseDensity::Uniform { lower: 0.0, upper: f64::INFINITY }).is_err());
        assert!(BaseDensity::new(BaseDensity::HalfCauchy { scale: 5.0 }).is_ok());
    }

    #[test]
    fn t_quantile_inverts_cdf() {
        for &df in &[1.0, 1.7, 4.0, 30.0, 300.0] {
            for &u in &[1e-12, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
                let t = student_t_quantile(u, df);
                let back = student_t_cdf(t, df);
                let err = if u < 0.5 { (back - u).abs() / u } else { ((1.0 - back) - (1.0 - u)).abs() / (1.0 - u) };
                assert!(err < 1e-9, "df={df} u={u} t={t} err={err}");
            }
        }
    }

    #[test]
    fn t_quantile_df_derivative() {
        for &u in &[0.03, 0.4, 0.9] {
            let (_, g) = gradient(|x| student_t_quantile(u, x[0]), &[3.3]);
            let h = 1e-5;
            let fd = (student_t_quantile(u, 3.3 + h) - student_t_quantile(u, 3.3 - h)) / (2.0 * h);
            assert!((g[0] - fd).abs() < 1e-7 * (1.0 + fd.abs()), "{} vs {}", g[0], fd);
        }
    }

    #[test]
    fn sample_moments() {
        let mut rng = RngKey::new(5).rng();
        let d = BaseDensity::StudentT { loc: 1.0, scale: 2.0, df: 6.0 };
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // var = scale² df/(df-2) = 6
        assert!((mean - 1.0).abs() < 0.03);
        assert!((var - 6.0).abs() < 0.2, "{var}");
    }
}
