//! Small enumerable algorithms used to exercise the machinery.
//!
//! Binary inputs are `±1`; an item counts as a one when it is positive.

use super::{state_width, unzigzag, zigzag, KPassAlgorithm, Randomness};
use crate::streams::Item;

/// Never changes state.
#[derive(Debug, Clone)]
pub struct Constant {
    pub k: usize,
}

impl KPassAlgorithm for Constant {
    fn name(&self) -> String {
        format!("constant/k{}", self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        1
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, _: usize, _: Item, state: u64, _: u32) -> u64 {
        state
    }
    fn output(&self, _: u64) -> i64 {
        0
    }
}

/// Stores the first bit and keeps it: 0 = empty, 1 = saw -1, 2 = saw +1.
#[derive(Debug, Clone)]
pub struct StoreFirst {
    pub k: usize,
}

impl KPassAlgorithm for StoreFirst {
    fn name(&self) -> String {
        format!("store-first/k{}", self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        2
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, _: u32) -> u64 {
        if pass == 1 && j == 1 {
            1 + (x > 0) as u64
        } else {
            state
        }
    }
    fn output(&self, state: u64) -> i64 {
        match state {
            2 => 1,
            1 => -1,
            _ => 0,
        }
    }
}

/// Running sum of the items modulo `2^bits`, carried across passes.
#[derive(Debug, Clone)]
pub struct SumMod {
    pub k: usize,
    pub bits: u32,
}

impl KPassAlgorithm for SumMod {
    fn name(&self) -> String {
        format!("sum-mod-{}/k{}", 1u64 << self.bits, self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        self.bits
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, _: usize, x: Item, state: u64, _: u32) -> u64 {
        (state as i64 + x).rem_euclid(1i64 << self.bits) as u64
    }
    fn output(&self, state: u64) -> i64 {
        state as i64
    }
}

/// Counts positive items across all passes, saturating at `threshold`;
/// outputs 1 once the threshold is reached.
#[derive(Debug, Clone)]
pub struct Threshold {
    pub k: usize,
    pub threshold: u64,
}

impl KPassAlgorithm for Threshold {
    fn name(&self) -> String {
        format!("threshold-{}/k{}", self.threshold, self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        state_width(self.threshold).max(1)
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, _: usize, x: Item, state: u64, _: u32) -> u64 {
        if x > 0 {
            (state + 1).min(self.threshold)
        } else {
            state
        }
    }
    fn output(&self, state: u64) -> i64 {
        (state >= self.threshold) as i64
    }
}

/// Exact running sum during the first pass (zigzag encoded); later passes
/// idle.
#[derive(Debug, Clone)]
pub struct ExactSum {
    pub k: usize,
    pub n: usize,
}

impl ExactSum {
    pub fn new(k: usize, n: usize) -> Self {
        ExactSum { k, n }
    }
}

impl KPassAlgorithm for ExactSum {
    fn name(&self) -> String {
        format!("exact-sum/k{}", self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        state_width(zigzag(self.n as i64)).max(1)
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, pass: usize, _: usize, x: Item, state: u64, _: u32) -> u64 {
        if pass == 1 {
            zigzag(unzigzag(state) + x)
        } else {
            state
        }
    }
    fn output(&self, state: u64) -> i64 {
        unzigzag(state)
    }
    fn declared_len(&self) -> Option<usize> {
        Some(self.n)
    }
}

/// One pass. Keeps the exact sum until the last item, then collapses it to the
/// majority bit (1 for a non-negative sum).
#[derive(Debug, Clone)]
pub struct Majority {
    pub n: usize,
}

impl KPassAlgorithm for Majority {
    fn name(&self) -> String {
        "majority".into()
    }
    fn passes(&self) -> usize {
        1
    }
    fn memory_bits(&self) -> u32 {
        state_width(zigzag(self.n as i64)).max(1)
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, j: usize, x: Item, state: u64, _: u32) -> u64 {
        let sum = unzigzag(state) + x;
        if j == self.n {
            (sum >= 0) as u64
        } else {
            zigzag(sum)
        }
    }
    fn output(&self, state: u64) -> i64 {
        if state == 1 {
            1
        } else {
            -1
        }
    }
    fn declared_len(&self) -> Option<usize> {
        Some(self.n)
    }
}

/// Increments on every item.
#[derive(Debug, Clone)]
pub struct Counter {
    pub n: usize,
}

impl KPassAlgorithm for Counter {
    fn name(&self) -> String {
        "counter".into()
    }
    fn passes(&self) -> usize {
        1
    }
    fn memory_bits(&self) -> u32 {
        state_width(self.n as u64).max(1)
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, _: usize, _: Item, state: u64, _: u32) -> u64 {
        state + 1
    }
    fn output(&self, state: u64) -> i64 {
        state as i64
    }
    fn declared_len(&self) -> Option<usize> {
        Some(self.n)
    }
}

/// Two passes. Bit 0 holds the parity of the number of positive items after
/// pass 1; at the first item of pass 2, bit 1 records whether that item's bit
/// equals the parity.
#[derive(Debug, Clone, Default)]
pub struct ParityCompare;

impl KPassAlgorithm for ParityCompare {
    fn name(&self) -> String {
        "parity-compare".into()
    }
    fn passes(&self) -> usize {
        2
    }
    fn memory_bits(&self) -> u32 {
        2
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, _: u32) -> u64 {
        let bit = (x > 0) as u64;
        match (pass, j) {
            (1, _) => state ^ bit,
            (2, 1) => state | (((state & 1) == bit) as u64) << 1,
            _ => state,
        }
    }
    fn output(&self, state: u64) -> i64 {
        (state >> 1) as i64
    }
}

/// Stores the first bit with probability 1/2 (random symbol at `(1, 1)`).
#[derive(Debug, Clone)]
pub struct NoisyStore {
    pub k: usize,
}

impl KPassAlgorithm for NoisyStore {
    fn name(&self) -> String {
        format!("noisy-store/k{}", self.k)
    }
    fn passes(&self) -> usize {
        self.k
    }
    fn memory_bits(&self) -> u32 {
        2
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn randomness(&self, pass: usize, j: usize) -> Randomness {
        if pass == 1 && j == 1 {
            Randomness::Bernoulli(0.5)
        } else {
            Randomness::None
        }
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, r: u32) -> u64 {
        if pass == 1 && j == 1 && r == 1 {
            1 + (x > 0) as u64
        } else {
            state
        }
    }
    fn output(&self, state: u64) -> i64 {
        state as i64
    }
}

/// One-pass needle toy over `[1, t]`: remembers the first item and flags any
/// later repeat of it.
#[derive(Debug, Clone)]
pub struct ToyCollision {
    pub t: u64,
}

impl ToyCollision {
    fn value_bits(&self) -> u32 {
        state_width(self.t)
    }
}

impl KPassAlgorithm for ToyCollision {
    fn name(&self) -> String {
        "toy-collision".into()
    }
    fn passes(&self) -> usize {
        1
    }
    fn memory_bits(&self) -> u32 {
        self.value_bits() + 1
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, _: usize, j: usize, x: Item, state: u64, _: u32) -> u64 {
        let mask = (1u64 << self.value_bits()) - 1;
        if j == 1 {
            x as u64
        } else if state & mask == x as u64 {
            state | (1 << self.value_bits())
        } else {
            state
        }
    }
    fn output(&self, state: u64) -> i64 {
        (state >> self.value_bits()) as i64
    }
}

/// Two-pass needle toy: pass 1 remembers the first item, pass 2 counts its
/// occurrences up to 2. Outputs 1 if it occurs at least twice.
#[derive(Debug, Clone)]
pub struct StoreThenCount {
    pub t: u64,
}

impl StoreThenCount {
    fn value_bits(&self) -> u32 {
        state_width(self.t)
    }
}

impl KPassAlgorithm for StoreThenCount {
    fn name(&self) -> String {
        "store-then-count".into()
    }
    fn passes(&self) -> usize {
        2
    }
    fn memory_bits(&self) -> u32 {
        self.value_bits() + 2
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, _: u32) -> u64 {
        let vb = self.value_bits();
        let mask = (1u64 << vb) - 1;
        match pass {
            1 if j == 1 => x as u64,
            1 => state,
            _ => {
                let count = state >> vb;
                if state & mask == x as u64 && count < 2 {
                    (state & mask) | ((count + 1) << vb)
                } else {
                    state
                }
            }
        }
    }
    fn output(&self, state: u64) -> i64 {
        ((state >> self.value_bits()) >= 2) as i64
    }
}

/// The four algorithms of the inequality grid, each with `k` passes.
pub fn grid_zoo(k: usize) -> Vec<Box<dyn KPassAlgorithm>> {
    vec![Box::new(Constant { k }), Box::new(StoreFirst { k }), Box::new(SumMod { k, bits: 2 }), Box::new(Threshold { k, threshold: 2 })]
}
