//! Splittable, counter-based random keys.
//!
//! A key is a 128-bit value. Child keys are derived by hashing the parent
//! with a counter, so a run seed determines every stream below it and
//! sibling streams never share state. Actual variates come from ChaCha12
//! seeded with the key.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey {
    hi: u64,
    lo: u64,
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        let hi = mix64(seed.wrapping_add(GOLDEN));
        let lo = mix64(hi ^ seed.rotate_left(17) ^ 0x5851_F42D_4C95_7F2D);
        RngKey { hi, lo }
    }

    /// Child key for `data`; distinct `data` give independent children.
    pub fn fold_in(self, data: u64) -> Self {
        let d = mix64(data.wrapping_mul(GOLDEN) ^ 0xD1B5_4A32_D192_ED03);
        let hi = mix64(self.hi ^ d);
        let lo = mix64(self.lo.wrapping_add(d).rotate_left(23) ^ hi);
        RngKey { hi, lo }
    }

    pub fn split(self) -> (Self, Self) {
        (self.fold_in(u64::MAX - 1), self.fold_in(u64::MAX))
    }

    /// A 64-bit seed summarizing the key (used for derived run seeds).
    pub fn to_u64(self) -> u64 {
        mix64(self.hi ^ self.lo.rotate_left(32))
    }

    pub fn rng(self) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        let words = [self.hi, self.lo, mix64(self.hi ^ GOLDEN), mix64(self.lo ^ GOLDEN)];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let a: Vec<u64> = (0..8).map(|_| 0).scan(RngKey::new(7).rng(), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(RngKey::new(7).rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn children_differ() {
        let k = RngKey::new(3);
        let (a, b) = k.split();
        assert_ne!(a, b);
        assert_ne!(k.fold_in(0), k.fold_in(1));
        assert_ne!(k.fold_in(0), RngKey::new(4).fold_in(0));
        assert_eq!(k.fold_in(11), RngKey::new(3).fold_in(11));
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let k = RngKey::new(99);
        let n = 20_000;
        let mut ra = k.fold_in(0).rng();
        let mut rb = k.fold_in(1).rng();
        let (mut sab, mut sa, mut sb, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a: f64 = ra.random();
            let b: f64 = rb.random();
            sab += a * b;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
        }
        let nf = n as f64;
        let cov = sab / nf - sa * sb / nf / nf;
        let corr = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
        // 4 standard errors of a null correlation
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr = {corr}");
    }
}
