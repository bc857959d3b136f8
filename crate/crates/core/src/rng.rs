//! Portable random streams.
//!
//! The generator is xoshiro256** seeded from a 64-bit value through SplitMix64
//! (the reference seeding procedure of the xoshiro authors). Derived quantities
//! are fixed so that streams agree across platforms and implementations:
//!
//! * uniform: `((x >> 11) + 1) * 2^-53`, a value in `(0, 1]`;
//! * categorical: the first index whose running cumulative sum is `>= u`; if
//!   rounding leaves `u` above the total, the last index with positive mass;
//! * standard normal: Box–Muller, `sqrt(-2 ln u1) * cos(2π u2)`, consuming two
//!   uniforms per draw (the sine half is discarded).

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const INV_2_POW_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    inner: Xoshiro256StarStar,
}

impl StreamRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `(0, 1]` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * INV_2_POW_53
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Samples an index from a probability vector by inverse CDF.
    #[inline]
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        sample_index(probs, u)
    }

    /// Uniform integer in `0..n` by rejection-free multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Inverse-CDF lookup with the tie rule documented at module level.
#[inline]
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if cum >= u {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// SplitMix64 finalizer, used to derive independent per-run seeds from a base seed.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = StreamRng::from_seed(42);
        let mut b = StreamRng::from_seed(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(StreamRng::from_seed(1).next_u64(), StreamRng::from_seed(2).next_u64());
    }

    #[test]
    fn known_first_output() {
        // xoshiro256** seeded by SplitMix64(0); pins the stream across builds.
        let mut r = StreamRng::from_seed(0);
        assert_eq!(r.next_u64(), 0x99EC_5F36_CB75_F2B4);
    }

    #[test]
    fn uniform_range() {
        let mut r = StreamRng::from_seed(3);
        for _ in 0..100_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn categorical_skips_zero_mass() {
        assert_eq!(sample_index(&[0.0, 0.5, 0.5], 1e-300), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.5), 0);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 1.0 + 1e-16), 1);
        assert_eq!(sample_index(&[1.0], 1.0), 0);
    }

    #[test]
    fn normal_moments() {
        let mut r = StreamRng::from_seed(11);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.standard_normal();
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }
}
