//! Scalar reverse-mode automatic differentiation.
//!
//! Densities, flows and models are written once against the [`Real`] trait.
//! Instantiated with `f64` they evaluate plainly; instantiated with [`Var`]
//! they record a tape that [`Tape::gradient`] sweeps backwards.
//!
//! Nodes store a variable-length parent list, so dot products and sums are
//! recorded as a single node instead of a chain of binary additions.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar type that densities and transforms are generic over.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant (carries no gradient).
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn ln_gamma(self) -> Self;

    /// A primitive whose value and partial derivatives were computed
    /// externally: `value` depends on each `x` in `deps` with slope `d`.
    fn lift(value: f64, deps: &[(Self, f64)]) -> Self;

    /// `Σ a_i b_i` as one node.
    fn dot(a: &[Self], b: &[Self]) -> Self;

    /// `Σ x_i` as one node.
    fn sum(xs: &[Self]) -> Self;

    /// Whether derivatives with respect to this value are being recorded.
    fn is_recorded(self) -> bool;

    fn square(self) -> Self {
        self * self
    }

    /// `ln(1 + e^x)`, stable for large |x|.
    fn softplus(self) -> Self {
        let v = self.value();
        if v > 30.0 {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }

    fn sigmoid(self) -> Self {
        let v = self.value();
        if v >= 0.0 {
            let e = (-self).exp();
            (e + 1.0).recip()
        } else {
            let e = self.exp();
            e / (e + 1.0)
        }
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn ln_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }
    #[inline]
    fn lift(value: f64, _deps: &[(Self, f64)]) -> Self {
        value
    }
    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    #[inline]
    fn sum(xs: &[Self]) -> Self {
        xs.iter().sum()
    }
    #[inline]
    fn is_recorded(self) -> bool {
        false
    }
}

const CONST: u32 = u32::MAX;

#[derive(Default)]
struct TapeInner {
    /// `ends[i]` is one past the last parent slot of node `i`.
    ends: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

impl TapeInner {
    #[inline]
    fn seal(&mut self) -> u32 {
        self.ends.push(self.parents.len() as u32);
        (self.ends.len() - 1) as u32
    }
}

/// Append-only record of operations on [`Var`]s.
pub struct Tape {
    inner: RefCell<TapeInner>,
}

thread_local! {
    // buffers of the last dropped tape, reused to avoid regrowing
    static SPARE: RefCell<Option<TapeInner>> = const { RefCell::new(None) };
}

impl Default for Tape {
    fn default() -> Self {
        let mut inner = SPARE.with(|s| s.borrow_mut().take()).unwrap_or_default();
        inner.ends.clear();
        inner.parents.clear();
        inner.partials.clear();
        Tape {
            inner: RefCell::new(inner),
        }
    }
}

impl Drop for Tape {
    fn drop(&mut self) {
        let inner = std::mem::take(self.inner.get_mut());
        SPARE.with(|s| {
            let mut s = s.borrow_mut();
            let keep = s.as_ref().is_none_or(|o| o.parents.capacity() < inner.parents.capacity());
            if keep {
                *s = Some(inner);
            }
        });
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node but keeps the allocations. All `Var`s created before
    /// the call become invalid.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.ends.clear();
        inner.parents.clear();
        inner.partials.clear();
    }

    /// A fresh independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(std::iter::empty());
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, deps: impl Iterator<Item = (u32, f64)>) -> u32 {
        let mut inner = self.inner.borrow_mut();
        for (p, d) in deps {
            inner.parents.push(p);
            inner.partials.push(d);
        }
        inner.seal()
    }

    /// Pushes a node whose parents are written directly by `fill`.
    #[inline]
    fn push_with(&self, max_deps: usize, fill: impl FnOnce(&mut Vec<u32>, &mut Vec<f64>)) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let inner = &mut *inner;
        inner.parents.reserve(max_deps);
        inner.partials.reserve(max_deps);
        fill(&mut inner.parents, &mut inner.partials);
        inner.seal()
    }

    /// Backward sweep seeded with `(output, adjoint)` pairs. Returns the
    /// adjoint of `inputs`.
    pub fn gradient(&self, seeds: &[(Var<'_>, f64)], inputs: &[Var<'_>]) -> Vec<f64> {
        let inner = self.inner.borrow();
        let n = inner.ends.len();
        let mut adj = vec![0.0; n];
        for (v, s) in seeds {
            if v.idx != CONST {
                adj[v.idx as usize] += s;
            }
        }
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let start = if i == 0 { 0 } else { inner.ends[i - 1] as usize };
            let end = inner.ends[i] as usize;
            for slot in start..end {
                adj[inner.parents[slot] as usize] += a * inner.partials[slot];
            }
        }
        inputs
            .iter()
            .map(|v| if v.idx == CONST { 0.0 } else { adj[v.idx as usize] })
            .collect()
    }
}

/// A scalar recorded on a [`Tape`] (or a constant that is not).
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.val)
    }
}

impl<'t> Var<'t> {
    pub fn is_constant(&self) -> bool {
        self.idx == CONST
    }

    fn constant(val: f64) -> Self {
        Var {
            tape: None,
            idx: CONST,
            val,
        }
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(t) => Var {
                tape: Some(t),
                idx: t.push_with(1, |parents, partials| {
                    parents.push(self.idx);
                    partials.push(d);
                }),
                val,
            },
        }
    }

    #[inline]
    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        let tape = match self.tape.or(other.tape) {
            None => return Var::constant(val),
            Some(t) => t,
        };
        let idx = tape.push_with(2, |parents, partials| {
            if self.idx != CONST {
                parents.push(self.idx);
                partials.push(da);
            }
            if other.idx != CONST {
                parents.push(other.idx);
                partials.push(db);
            }
        });
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        self.unary(self.val + o, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        self.unary(self.val - o, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        self.unary(self.val * o, o)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self.unary(self.val / o, 1.0 / o)
    }
}

impl<'t> Real for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn ln_1p(self) -> Self {
        self.unary(self.val.ln_1p(), 1.0 / (1.0 + self.val))
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn abs(self) -> Self {
        let d = if self.val >= 0.0 { 1.0 } else { -1.0 };
        self.unary(self.val.abs(), d)
    }
    fn powi(self, n: i32) -> Self {
        let d = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.val.powi(n - 1)
        };
        self.unary(self.val.powi(n), d)
    }
    fn ln_gamma(self) -> Self {
        self.unary(
            statrs::function::gamma::ln_gamma(self.val),
            statrs::function::gamma::digamma(self.val),
        )
    }
    fn lift(value: f64, deps: &[(Self, f64)]) -> Self {
        let tape = match deps.iter().find_map(|(v, _)| v.tape) {
            None => return Var::constant(value),
            Some(t) => t,
        };
        let idx = tape.push(
            deps.iter()
                .filter(|(v, _)| v.idx != CONST)
                .map(|(v, d)| (v.idx, *d)),
        );
        Var {
            tape: Some(tape),
            idx,
            val: value,
        }
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let val: f64 = a.iter().zip(b).map(|(x, y)| x.val * y.val).sum();
        let tape = match a.iter().chain(b).find_map(|v| v.tape) {
            None => return Var::constant(val),
            Some(t) => t,
        };
        let idx = tape.push_with(2 * a.len(), |parents, partials| {
            let start = parents.len();
            parents.resize(start + 2 * a.len(), 0);
            partials.resize(start + 2 * a.len(), 0.0);
            let (ps, ds) = (&mut parents[start..], &mut partials[start..]);
            let mut n = 0;
            for (x, y) in a.iter().zip(b) {
                ps[n] = x.idx;
                ds[n] = y.val;
                n += (x.idx != CONST) as usize;
                ps[n] = y.idx;
                ds[n] = x.val;
                n += (y.idx != CONST) as usize;
            }
            parents.truncate(start + n);
            partials.truncate(start + n);
        });
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }
    fn is_recorded(self) -> bool {
        self.idx != CONST
    }
    fn sum(xs: &[Self]) -> Self {
        let val: f64 = xs.iter().map(|x| x.val).sum();
        let tape = match xs.iter().find_map(|v| v.tape) {
            None => return Var::constant(val),
            Some(t) => t,
        };
        let idx = tape.push_with(xs.len(), |parents, partials| {
            for x in xs.iter().filter(|x| x.idx != CONST) {
                parents.push(x.idx);
                partials.push(1.0);
            }
        });
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }
}

/// Converts a slice of plain values into tape constants.
pub fn constants<R: Real>(xs: &[f64]) -> Vec<R> {
    xs.iter().map(|&x| R::cst(x)).collect()
}

/// Values of a slice of reals.
pub fn values<R: Real>(xs: &[R]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}

/// Gradient of a scalar function written against [`Real`], at `x`.
pub fn gradient<F>(f: F, x: &[f64]) -> (f64, Vec<f64>)
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let xs = tape.vars(x);
    let y = f(&xs);
    let g = tape.gradient(&[(y, 1.0)], &xs);
    (y.value(), g)
}
