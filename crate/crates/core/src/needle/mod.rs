//! One-pass needle detectors.
//!
//! [`m1`] handles dense needles (`p ≥ 1/√n`) with a clock, [`m2`] sparse ones
//! by splitting the domain into blocks, and [`baseline`] holds the exact
//! collision detector and the counter survival experiment.
//!
//! Hash functions are keyed PRFs of `(seed, group, item)`. Key material is
//! public randomness and is not charged to the space meter, which counts
//! counter bits plus any explicit registers.

pub mod baseline;
pub mod m1;
pub mod m2;

pub use baseline::{collision_baseline, survival_curve, Lifetimes, SurvivalPoint};
pub use m1::{m1_observe, m1_run, M1Config};
pub use m2::{m2_observe, m2_run, M2Config};

use serde::{Deserialize, Serialize};

use crate::rng::{hash3, mix64, streams as sid, unit_f64};
use crate::streams::Item;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeedleError {
    #[error("M1 needs p ≥ 1/√n (got p = {p}, n = {n})")]
    TooSparse { p: f64, n: u64 },
    #[error("M2 needs p > 0")]
    ZeroRate,
    #[error("invalid config: {0}")]
    Config(String),
}

/// Detector verdict. `Abort` is always scored as an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Zero,
    One,
    Abort,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Zero => "0",
            Verdict::One => "1",
            Verdict::Abort => "abort",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    /// The Poisson group sizes asked for more items than the stream holds.
    Exhausted,
    MemoryCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub verdict: Verdict,
    pub abort: Option<AbortReason>,
    pub peak_bits: u64,
    pub peak_counters: u64,
    pub items_read: u64,
    pub groups: u64,
}

/// The `(c1, c2, c3)` tuple plus the one-update-per-group flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackCounter {
    /// Hash value in `[1, C2]`.
    pub c1: u32,
    /// Lifespan in rounds.
    pub c2: u32,
    /// Occurrences.
    pub c3: u32,
    pub updated: bool,
}

impl TrackCounter {
    pub fn new(c1: u32) -> Self {
        TrackCounter { c1, c2: 0, c3: 0, updated: false }
    }

    /// Bits to store the counter: the three fields plus the flag.
    pub fn bits(&self) -> u64 {
        counter_bits(self.c1, self.c2, self.c3)
    }

    /// Counts `x` at most once per group.
    pub fn hit(&mut self) {
        if !self.updated {
            self.c3 += 1;
            self.updated = true;
        }
    }
}

pub(crate) fn counter_bits(c1: u32, c2: u32, c3: u32) -> u64 {
    (width(c1 as u64) + width(c2 as u64) + width(c3 as u64) + 1) as u64
}

/// Bits to write `v` in binary, at least one.
pub fn width(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

/// Keep a counter iff `c3 ≥ c2·num/den` or `c2 ≤ grace`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retention {
    pub num: u32,
    pub den: u32,
    pub grace: u32,
}

impl Retention {
    pub fn keeps(&self, c2: u32, c3: u32) -> bool {
        self.ratio_holds(c2, c3) || c2 <= self.grace
    }

    pub fn ratio_holds(&self, c2: u32, c3: u32) -> bool {
        c3 as u64 * self.den as u64 >= c2 as u64 * self.num as u64
    }
}

/// The PRF pair `h1`, `h2`. Membership `x ∈ h1(g)` is a Bernoulli test at
/// rate `density`, keyed by `(seed, g, x)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hashes {
    key: u64,
    threshold: u64,
    c2: u32,
}

impl Hashes {
    pub fn new(seed: u64, density: f64, c2: u32) -> Self {
        let threshold = if density >= 1.0 { u64::MAX } else { (density.max(0.0) * 2f64.powi(64)) as u64 };
        Hashes { key: hash3(seed, sid::HASH, 0), threshold, c2 }
    }

    /// Per-item word shared by every membership test on `x`.
    #[inline]
    pub fn item(&self, x: Item) -> u64 {
        hash3(self.key, 1, x as u64)
    }

    /// Per-group key for `h1(g)`.
    pub fn group(&self, g: u64) -> u64 {
        hash3(self.key, 2, g)
    }

    #[inline]
    pub fn member(&self, item: u64, group: u64) -> bool {
        self.threshold == u64::MAX || mix64(item ^ group) < self.threshold
    }

    /// `h2(x)` in `[1, C2]`.
    pub fn bucket(&self, x: Item) -> u32 {
        let u = unit_f64(hash3(self.key, 3, x as u64));
        1 + ((u * self.c2 as f64) as u32).min(self.c2 - 1)
    }
}

pub(crate) fn c2_from(c1: f64, factor: f64) -> Result<u32, NeedleError> {
    let c2 = c1 * factor;
    if !(c1 > 0.0) || (c2 - c2.round()).abs() > 1e-6 || c2.round() < 1.0 {
        return Err(NeedleError::Config(format!("C2 = {factor}·C1 must be a positive integer (C1 = {c1})")));
    }
    Ok(c2.round() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(width(0), 1);
        assert_eq!(width(1), 1);
        assert_eq!(width(2), 2);
        assert_eq!(width(255), 8);
        assert_eq!(TrackCounter::new(3).bits(), 2 + 1 + 1 + 1);
    }

    #[test]
    fn retention_is_exact() {
        let r = Retention { num: 1, den: 3, grace: 100 };
        assert!(r.keeps(100, 0));
        assert!(!r.keeps(101, 33));
        assert!(r.keeps(102, 34));
        assert!(r.ratio_holds(0, 0));
    }

    #[test]
    fn hashes_are_pure_and_calibrated() {
        let h = Hashes::new(9, 0.25, 10);
        let g = h.group(4);
        let a: Vec<bool> = (1..2000).map(|x| h.member(h.item(x), g)).collect();
        let b: Vec<bool> = (1..2000).map(|x| h.member(h.item(x), g)).collect();
        assert_eq!(a, b);
        let rate = a.iter().filter(|&&m| m).count() as f64 / a.len() as f64;
        assert!((rate - 0.25).abs() < 0.04, "{rate}");
        assert!((1..5000).all(|x| (1..=10).contains(&h.bucket(x))));
        let full = Hashes::new(9, 1.5, 1);
        assert!((1..100).all(|x| full.member(full.item(x), g) && full.bucket(x) == 1));
    }

    #[test]
    fn c2_must_be_integral() {
        assert_eq!(c2_from(6.0, 100.0), Ok(600));
        assert_eq!(c2_from(0.004, 1000.0), Ok(4));
        assert!(c2_from(0.0015, 100.0).is_err());
        assert!(c2_from(0.0, 100.0).is_err());
    }
}
