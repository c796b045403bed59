//! Counter-based splittable random number generator.
//!
//! Draws are a pure function of `(seed, stream, counter)`, computed with a
//! 10-round Philox-2x64 block. Two generators built from the same
//! `(seed, stream)` produce bit-identical sequences on every platform, and
//! [`Rng::split`] derives statistically independent child streams from an
//! index alone, so parallel work can be sharded deterministically: give
//! worker `i` the child `rng.split(i)` and the result never depends on how
//! many workers ran.

use crate::math;

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT_TWEAK: u64 = 0xB5B3_2E4C_6A93_F7D1;

/// One Philox-2x64-10 block: maps (key, counter pair) to two output words.
#[inline]
fn philox2x64(mut key: u64, mut c0: u64, mut c1: u64) -> (u64, u64) {
    for _ in 0..10 {
        let prod = (c0 as u128).wrapping_mul(PHILOX_M as u128);
        let lo = prod as u64;
        let hi = (prod >> 64) as u64;
        c0 = hi ^ key ^ c1;
        c1 = lo;
        key = key.wrapping_add(PHILOX_W);
    }
    (c0, c1)
}

/// Deterministic splittable RNG keyed by `(seed, stream)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Rng {
            seed,
            stream,
            counter: 0,
        }
    }

    /// Stream 0 of the given seed.
    pub fn from_seed(seed: u64) -> Self {
        Rng::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child generator for shard `i`. Pure in `(seed, stream, i)`: it does
    /// not advance or depend on this generator's counter.
    pub fn split(&self, i: u64) -> Rng {
        let (a, b) = philox2x64(self.seed ^ SPLIT_TWEAK, i, self.stream);
        Rng {
            seed: a,
            stream: b,
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let (out, _) = philox2x64(self.seed, self.counter, self.stream);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in `[-1, 1)`.
    pub fn uniform_signed(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    /// Standard normal via Box-Muller; consumes two draws per call.
    pub fn gaussian(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0);
        let u2 = self.uniform();
        math::sqrt(-2.0 * math::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Down-scaling a 53-bit uniform is unbiased enough for n << 2^53.
        (self.uniform() * n as f64) as usize % n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_identical_draws() {
        let mut a = Rng::new(1234, 7);
        let mut b = Rng::new(1234, 7);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_children_are_distinct() {
        let root = Rng::new(99, 0);
        let mut c0 = root.split(0);
        let mut c1 = root.split(1);
        let mut parent = root.clone();
        let a: Vec<u64> = (0..64).map(|_| c0.next_u64()).collect();
        let b: Vec<u64> = (0..64).map(|_| c1.next_u64()).collect();
        let p: Vec<u64> = (0..64).map(|_| parent.next_u64()).collect();
        assert_ne!(a, b);
        assert_ne!(a, p);
        assert_ne!(b, p);
    }

    #[test]
    fn split_is_pure() {
        let mut root = Rng::new(5, 5);
        let before = root.split(3);
        root.next_u64();
        let after = root.split(3);
        assert_eq!(before, after);
    }

    #[test]
    fn uniform_mean_and_range() {
        let mut rng = Rng::from_seed(42);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::from_seed(7);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = rng.gaussian();
            s1 += g;
            s2 += g * g;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
