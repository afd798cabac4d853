//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream derived from a
//! master seed plus a small tuple of tags (iteration, particle index, ...), so
//! results never depend on scheduling or worker count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag.
#[inline]
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag))
}

/// Stream for `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(seed, tag))
}

/// Stream for `(seed, index)` using ChaCha's native stream id, which is
/// cheaper than reseeding when thousands of per-particle streams are needed.
pub fn indexed_stream(seed: u64, index: u64) -> Stream {
    let mut s = Stream::seed_from_u64(seed);
    s.set_stream(index);
    s
}

/// Source of standard normal variates.
pub trait NoiseSource {
    fn standard_normal(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> NoiseSource for R {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

/// A noise source that always returns zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

/// Uniform draw in `[lo, hi)`; returns `lo` when the interval is empty.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}
