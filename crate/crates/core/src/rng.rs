//! Seeded randomness for mask planning.
//!
//! The generator is ChaCha8 seeded through `seed_from_u64`. Bounded draws use
//! Lemire's widening-multiply rejection method on `next_u64`, implemented
//! here rather than borrowed from `rand`'s distributions so the sample
//! sequence is pinned to this crate and to `SMSK` version 1. Changing either
//! requires bumping the plan format version.

use std::hash::Hasher;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct MaskRng {
    inner: ChaCha8Rng,
}

impl MaskRng {
    pub fn new(seed: u64) -> Self {
        MaskRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be nonzero.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "empty range");
        let bound = bound as u64;
        let mut m = (self.next_u64() as u128) * (bound as u128);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
            }
        }
        (m >> 64) as usize
    }

    /// The first `k` entries of `items` become a uniform sample without
    /// replacement (partial Fisher-Yates).
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.below(n - i);
            items.swap(i, j);
        }
    }

    /// Access to the underlying generator for `rand` distributions.
    pub fn as_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// 64-bit FNV-1a of `bytes`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Seed for one clip: the job seed mixed with a hash of the clip id, so the
/// result is independent of scheduling order.
pub fn clip_seed(seed: u64, clip_id: &str) -> u64 {
    seed ^ fnv1a(clip_id.as_bytes())
}

/// Round-half-up of `fraction * count`.
pub fn round_count(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 + 0.5).floor() as usize
}
