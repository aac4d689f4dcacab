//! Deterministic random streams.
//!
//! Every stochastic operation draws from a [`Stream`]: a xoshiro256++ generator
//! seeded through SplitMix64 (`seed_from_u64`). Uniform reals take the top 53
//! bits of a 64-bit output, giving values in `[0, 1)`. Per-case substreams are
//! keyed by the FNV-1a hash of the case identifier, so the output for one case
//! never depends on the order in which a batch is processed.

use core::f64::consts::PI;
use core::hash::Hasher;

use fnv::FnvHasher;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Source of uniform reals in `[0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;

    /// Uniform on `[lo, hi)`, sampled as `lo + u * (hi - lo)`; returns `lo` when
    /// the range is degenerate.
    fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_uniform();
        if lo == hi {
            lo
        } else {
            lo + u * (hi - lo)
        }
    }

    /// Standard normal pair by the Box-Muller transform of two uniforms.
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    inner: Xoshiro256PlusPlus,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Substream for a named case (or slab, or sample) under a run seed.
    pub fn for_key(seed: u64, key: &str) -> Self {
        Self::new(seed ^ key_hash(key))
    }

    /// Substream for an integer key, e.g. a slab index.
    pub fn for_index(seed: u64, index: u64) -> Self {
        let mut h = FnvHasher::default();
        h.write_u64(index);
        Self::new(seed ^ h.finish())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl UniformSource for Stream {
    fn next_uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// FNV-1a 64-bit hash of a key.
pub fn key_hash(key: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(key.as_bytes());
    h.finish()
}

/// Replays a fixed list of uniforms, then repeats the last one.
///
/// Used to pin draw sequences when checking sampling order by hand.
#[derive(Debug, Clone)]
pub struct FixedDraws<'a> {
    draws: &'a [f64],
    pos: usize,
}

impl<'a> FixedDraws<'a> {
    pub fn new(draws: &'a [f64]) -> Self {
        assert!(!draws.is_empty(), "FixedDraws needs at least one value");
        Self { draws, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl UniformSource for FixedDraws<'_> {
    fn next_uniform(&mut self) -> f64 {
        let v = self.draws[self.pos.min(self.draws.len() - 1)];
        self.pos += 1;
        v
    }
}

impl<T: UniformSource + ?Sized> UniformSource for &mut T {
    fn next_uniform(&mut self) -> f64 {
        (**self).next_uniform()
    }
}
