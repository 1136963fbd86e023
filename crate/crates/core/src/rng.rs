//! Seed handling.
//!
//! Every random object in the crate is derived from a single [`Seed`]. A seed
//! can be split into independent child seeds by tag, turned into a sequential
//! ChaCha generator, or queried directly at an index. Index queries are a
//! counter-based SplitMix64 stream, which is what lets the large sketch and
//! Gaussian matrices stay implicit: any entry can be regenerated on demand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A splittable, random-access seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(u64);

impl Seed {
    pub const fn new(value: u64) -> Self {
        Seed(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Independent child stream identified by `tag`.
    pub fn child(self, tag: u64) -> Seed {
        Seed(mix64(
            mix64(self.0 ^ 0x6a09_e667_f3bc_c909) ^ tag.wrapping_mul(GOLDEN).wrapping_add(0x3c6e_f372_fe94_f82b),
        ))
    }

    /// Child stream for a named purpose; the name is hashed into the tag.
    pub fn named(self, name: &str) -> Seed {
        let tag = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
        });
        self.child(tag)
    }

    /// Sequential generator for code that draws values in order.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// The `index`-th output of the SplitMix64 stream started at this seed.
    #[inline]
    pub fn u64_at(self, index: u64) -> u64 {
        mix64(self.0.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Random word keyed by a pair of indices.
    #[inline]
    pub fn u64_at2(self, a: u64, b: u64) -> u64 {
        mix64(self.u64_at(a) ^ b.wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform_at(self, index: u64) -> f64 {
        unit_f64(self.u64_at(index))
    }

    /// Uniform integer in `0..bound` (multiply-shift, bias below 2⁻⁶⁴·bound).
    #[inline]
    pub fn below_at(self, index: u64, bound: usize) -> usize {
        below(self.u64_at(index), bound)
    }

    /// Standard normal variate at `index` (Box–Muller on two stream words).
    #[inline]
    pub fn gaussian_at(self, index: u64) -> f64 {
        gaussian_from(
            self.u64_at(index.wrapping_mul(2)),
            self.u64_at(index.wrapping_mul(2).wrapping_add(1)),
        )
    }

    /// Standard normal variate keyed by a pair of indices.
    #[inline]
    pub fn gaussian_at2(self, a: u64, b: u64) -> f64 {
        let w = self.u64_at2(a, b);
        gaussian_from(w, mix64(w ^ GOLDEN))
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

#[inline]
pub(crate) fn below(word: u64, bound: usize) -> usize {
    ((u128::from(word) * bound as u128) >> 64) as usize
}

#[inline]
fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn gaussian_from(w1: u64, w2: u64) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1 = ((w1 >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
    let u2 = unit_f64(w2);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_differ_and_are_stable() {
        let s = Seed::new(7);
        assert_ne!(s.child(0), s.child(1));
        assert_eq!(s.child(3), Seed::new(7).child(3));
        assert_ne!(s.named("g1"), s.named("g2"));
    }

    #[test]
    fn gaussian_stream_moments() {
        let s = Seed::new(11);
        let n = 200_000u64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..n {
            let g = s.gaussian_at(i);
            m1 += g;
            m2 += g * g;
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn below_stays_in_range() {
        let s = Seed::new(3);
        let mut counts = [0usize; 5];
        for i in 0..50_000 {
            counts[s.below_at(i, 5)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }
}
