//! Monotone rational quadratic splines on an interval.
//!
//! Knots follow the usual neural-spline parameterization: bin widths and
//! heights are a floored softmax scaled to the interval, interior knot
//! derivatives a floored softplus, boundary derivatives fixed at one. Offsets
//! are chosen so that all-zero raw parameters give the identity map.

use crate::error::{Error, Result};
use crate::numeric::Real;

/// Smallest bin width or height, as a fraction of the interval.
pub const MIN_BIN: f64 = 1e-3;
/// Smallest interior derivative.
pub const MIN_DERIVATIVE: f64 = 1e-3;

/// Number of raw parameters for a spline with `bins` bins.
pub const fn raw_len(bins: usize) -> usize {
    3 * bins - 1
}

/// softplus(DERIV_SHIFT) + MIN_DERIVATIVE = 1.
fn deriv_shift() -> f64 {
    ((1.0 - MIN_DERIVATIVE).exp() - 1.0).ln()
}

fn bin_sizes<R: Real>(raw: &[R], span: f64) -> Vec<R> {
    let n = raw.len();
    let m = raw.iter().map(|r| r.value()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<R> = raw.iter().map(|&r| (r - m).exp()).collect();
    let total = R::sum(&e);
    let scale = span * (1.0 - MIN_BIN * n as f64);
    e.into_iter()
        .map(|x| x / total * scale + MIN_BIN * span)
        .collect()
}

fn knots<R: Real>(sizes: &[R], lo: f64, hi: f64) -> Vec<R> {
    let mut k = Vec::with_capacity(sizes.len() + 1);
    let mut acc = R::cst(lo);
    k.push(acc);
    for s in &sizes[..sizes.len() - 1] {
        acc = acc + *s;
        k.push(acc);
    }
    // the last knot is pinned so the map is onto exactly
    k.push(R::cst(hi));
    k
}

/// A spline with realized knots, generic over the scalar type.
#[derive(Clone, Debug)]
pub struct Spline<R> {
    xs: Vec<R>,
    ys: Vec<R>,
    ds: Vec<R>,
}

impl<R: Real> Spline<R> {
    /// Realizes knots from `3B - 1` raw parameters laid out as
    /// `[widths (B), heights (B), interior derivatives (B - 1)]`.
    pub fn from_raw(raw: &[R], lo: f64, hi: f64) -> Self {
        let bins = (raw.len() + 1) / 3;
        debug_assert_eq!(raw.len(), raw_len(bins));
        let span = hi - lo;
        let xs = knots(&bin_sizes(&raw[..bins], span), lo, hi);
        let ys = knots(&bin_sizes(&raw[bins..2 * bins], span), lo, hi);
        let shift = deriv_shift();
        let mut ds = Vec::with_capacity(bins + 1);
        ds.push(R::cst(1.0));
        for &r in &raw[2 * bins..] {
            ds.push((r + shift).softplus() + MIN_DERIVATIVE);
        }
        ds.push(R::cst(1.0));
        Spline { xs, ys, ds }
    }

    pub fn bins(&self) -> usize {
        self.xs.len() - 1
    }

    fn locate(knots: &[R], v: f64) -> usize {
        // knots are increasing; the first bin whose right edge exceeds v
        let n = knots.len() - 1;
        let k = knots[1..].partition_point(|k| k.value() <= v);
        k.min(n - 1)
    }

    /// `(y, ln dy/dx)` for `x` strictly inside the interval.
    pub fn forward(&self, x: R) -> (R, R) {
        let k = Self::locate(&self.xs, x.value());
        let w = self.xs[k + 1] - self.xs[k];
        let h = self.ys[k + 1] - self.ys[k];
        let s = h / w;
        let (d0, d1) = (self.ds[k], self.ds[k + 1]);
        let xi = (x - self.xs[k]) / w;
        let om = -xi + 1.0;
        let xo = xi * om;
        let denom = s + (d1 + d0 - s * 2.0) * xo;
        let y = self.ys[k] + h * (s * xi.square() + d0 * xo) / denom;
        let num = s.square() * (d1 * xi.square() + s * xo * 2.0 + d0 * om.square());
        let log_det = num.ln() - denom.ln() * 2.0;
        (y, log_det)
    }

    /// `(x, ln dx/dy)` for `y` strictly inside the interval.
    pub fn inverse(&self, y: R) -> (R, R) {
        let k = Self::locate(&self.ys, y.value());
        let w = self.xs[k + 1] - self.xs[k];
        let h = self.ys[k + 1] - self.ys[k];
        let s = h / w;
        let (d0, d1) = (self.ds[k], self.ds[k + 1]);
        let dy = y - self.ys[k];
        let t = d1 + d0 - s * 2.0;
        let a = h * (s - d0) + dy * t;
        let b = h * d0 - dy * t;
        let c = -(s * dy);
        let disc = b.square() - a * c * 4.0;
        // root of a ξ² + b ξ + c = 0 that lies in [0, 1], cancellation free
        let xi = c * 2.0 / (-b - disc.sqrt());
        let x = xi * w + self.xs[k];
        let (_, fwd) = self.forward(x);
        (x, -fwd)
    }
}

/// A standalone spline transform with its own raw parameters.
#[derive(Clone, Debug)]
pub struct RqsTransform {
    lower: f64,
    upper: f64,
    bins: usize,
    raw: Vec<f64>,
}

impl RqsTransform {
    pub fn new(lower: f64, upper: f64, bins: usize, raw: Vec<f64>) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::config("rqs", "interval must be finite and ordered"));
        }
        if bins < 1 {
            return Err(Error::config("rqs", "at least one bin is required"));
        }
        if raw.len() != raw_len(bins) {
            return Err(Error::DimensionMismatch {
                expected: raw_len(bins),
                got: raw.len(),
            });
        }
        if raw.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("rqs", "knot parameters must be finite"));
        }
        Ok(RqsTransform {
            lower,
            upper,
            bins,
            raw,
        })
    }

    /// Identity spline.
    pub fn identity(lower: f64, upper: f64, bins: usize) -> Result<Self> {
        Self::new(lower, upper, bins, vec![0.0; raw_len(bins)])
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn spline(&self) -> Spline<f64> {
        Spline::from_raw(&self.raw, self.lower, self.upper)
    }

    fn check(&self, v: f64) -> Result<()> {
        if v > self.lower && v < self.upper {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                value: v,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

pub fn rqs_forward(t: &RqsTransform, x: f64) -> Result<(f64, f64)> {
    t.check(x)?;
    Ok(t.spline().forward(x))
}

pub fn rqs_inverse(t: &RqsTransform, y: f64) -> Result<(f64, f64)> {
    t.check(y)?;
    Ok(t.spline().inverse(y))
}
