//! Counter-based splittable randomness.
//!
//! Every draw is a pure function of `(seed, stream, position, word)`, so any
//! item of any stream can be regenerated without replaying the ones before it.

use rand::{Rng, RngCore};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed hash of three words.
#[inline]
pub fn hash3(a: u64, b: u64, c: u64) -> u64 {
    let h = mix64(a.wrapping_add(GOLDEN));
    let h = mix64(h ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93));
    mix64(h ^ c.wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Uniform in `[0, 1)` from the top 53 bits of `x`.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stream identifiers used by the generators.
pub mod streams {
    pub const ALPHA: u64 = 1;
    pub const ITEMS: u64 = 2;
    pub const COINS: u64 = 3;
    pub const ORDER: u64 = 4;
    pub const ALG_TAPE: u64 = 5;
    pub const HASH: u64 = 6;
    pub const GROUPS: u64 = 7;
    pub const TRIAL: u64 = 8;
    pub const SIM: u64 = 9;
    pub const MASK: u64 = 10;
}

/// A SplitMix64 sequence whose starting point is derived from
/// `(seed, stream, position)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    base: u64,
    word: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64, position: u64) -> Self {
        CounterRng { base: hash3(seed, stream, position), word: 0 }
    }

    /// Derives a child seed; used to give each trial its own master seed.
    pub fn derive(seed: u64, stream: u64, position: u64) -> u64 {
        hash3(seed, stream, position)
    }

    pub fn unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.word = self.word.wrapping_add(1);
        mix64(self.base.wrapping_add(self.word.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Source of the discrete random choices made by generators and algorithms.
///
/// Implemented by [`CounterRng`] for sampling and by
/// [`crate::enumerate::EnumTape`] for exact enumeration of all outcomes.
pub trait Draw {
    /// Uniform on `[0, bound)`.
    fn below(&mut self, bound: u64) -> u64;
    fn bernoulli(&mut self, p: f64) -> bool;
}

impl Draw for CounterRng {
    fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        self.gen_range(0..bound)
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.gen_bool(p)
        }
    }
}

impl<D: Draw + ?Sized> Draw for &mut D {
    fn below(&mut self, bound: u64) -> u64 {
        (**self).below(bound)
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        (**self).bernoulli(p)
    }
}
