//! Feed-forward conditioners with optional autoregressive masking.
//!
//! Masks are never materialized. Hidden units are sorted by degree, so every
//! unit connects to a prefix of the previous layer and only those weights
//! are stored.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numeric::Real;

#[derive(Clone, Debug)]
struct Layer {
    /// Prefix length of the previous layer each unit reads.
    prefixes: Vec<usize>,
    offset: usize,
    activate: bool,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.prefixes.iter().map(|p| p + 1).sum()
    }
}

/// A tanh MLP whose weights live in an external parameter slice.
#[derive(Clone, Debug)]
pub struct Mlp {
    n_in: usize,
    layers: Vec<Layer>,
    /// For masked networks, outputs per autoregressive coordinate.
    per_coord: usize,
}

fn build(n_in: usize, shapes: Vec<(Vec<usize>, bool)>, per_coord: usize) -> Mlp {
    let mut offset = 0;
    let layers = shapes
        .into_iter()
        .map(|(prefixes, activate)| {
            let l = Layer {
                prefixes,
                offset,
                activate,
            };
            offset += l.n_params();
            l
        })
        .collect();
    Mlp {
        n_in,
        layers,
        per_coord,
    }
}

impl Mlp {
    /// Fully connected `n_in → hidden → hidden → n_out`.
    pub fn dense(n_in: usize, hidden: usize, n_out: usize) -> Self {
        build(
            n_in,
            vec![
                (vec![n_in; hidden], true),
                (vec![hidden; hidden], true),
                (vec![hidden; n_out], false),
            ],
            n_out,
        )
    }

    /// Autoregressive network over `d` inputs emitting `per_coord` outputs
    /// for each coordinate; outputs for coordinate `i` depend only on inputs
    /// `0..i`.
    pub fn made(d: usize, hidden: usize, per_coord: usize) -> Self {
        assert!(d >= 2, "autoregressive conditioner needs at least two inputs");
        let deg: Vec<usize> = (0..hidden).map(|k| 1 + k * (d - 1) / hidden).collect();
        // unit of degree m reads inputs of degree ≤ m, i.e. the first m inputs
        let h1: Vec<usize> = deg.clone();
        let upto = |m: usize| deg.partition_point(|&x| x <= m);
        let h2: Vec<usize> = deg.iter().map(|&m| upto(m)).collect();
        // coordinate i (degree i + 1) reads units of degree ≤ i
        let out: Vec<usize> = (0..d)
            .flat_map(|i| std::iter::repeat_n(upto(i), per_coord))
            .collect();
        build(d, vec![(h1, true), (h2, true), (out, false)], per_coord)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.prefixes.len())
    }

    /// Hidden weights `N(0, 1/fan_in)`, biases zero, output layer zero so
    /// the network starts at the zero map.
    pub fn init<G: Rng + ?Sized>(&self, rng: &mut G, params: &mut [f64]) {
        debug_assert_eq!(params.len(), self.n_params());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut at = layer.offset;
            for &p in &layer.prefixes {
                for w in &mut params[at..at + p] {
                    *w = if li == last {
                        0.0
                    } else {
                        let z: f64 = StandardNormal.sample(rng);
                        z / (p as f64).sqrt()
                    };
                }
                params[at + p] = 0.0;
                at += p + 1;
            }
        }
    }

    fn layer<R: Real>(&self, layer: &Layer, params: &[R], x: &[R], units: std::ops::Range<usize>) -> Vec<R> {
        let mut at = layer.offset + layer.prefixes[..units.start].iter().map(|p| p + 1).sum::<usize>();
        let mut out = Vec::with_capacity(units.len());
        for &p in &layer.prefixes[units] {
            let pre = if p == 0 {
                params[at]
            } else {
                R::dot(&params[at..at + p], &x[..p]) + params[at + p]
            };
            out.push(if layer.activate { pre.tanh() } else { pre });
            at += p + 1;
        }
        out
    }

    pub fn forward<R: Real>(&self, params: &[R], x: &[R]) -> Vec<R> {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(x.len(), self.n_in);
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = self.layer(layer, params, &h, 0..layer.prefixes.len());
        }
        h
    }

    /// Outputs of a masked network for coordinate `i` only; hidden units
    /// that cannot reach it are skipped.
    pub fn forward_coord<R: Real>(&self, params: &[R], x: &[R], i: usize) -> Vec<R> {
        let [l1, l2, out] = &self.layers[..] else {
            unreachable!("conditioners have two hidden layers")
        };
        let range = i * self.per_coord..(i + 1) * self.per_coord;
        let need2 = out.prefixes[range.start];
        let need1 = l2.prefixes[..need2].last().copied().unwrap_or(0);
        let h1 = self.layer(l1, params, x, 0..need1);
        let h2 = self.layer(l2, params, &h1, 0..need2);
        self.layer(out, params, &h2, range)
    }
}
