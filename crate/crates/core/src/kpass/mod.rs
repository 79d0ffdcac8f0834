//! Bounded-memory k-pass streaming algorithms as explicit state machines.
//!
//! States are `u64` codes. The width of a code is the number of bits needed to
//! write it down, and an algorithm declaring `s` bits of memory may never
//! produce a code wider than `s`.
//!
//! Passes and positions are 1-based: `m(i, j)` is the state after item `j` of
//! pass `i`, `m(1, 0)` is the initial state and `m(i + 1, 0) = m(i, n)`.

mod table;
pub mod zoo;

pub use table::{TableAlgorithm, TableError};

use crate::rng::{streams as sid, CounterRng, Draw};
use crate::streams::Item;

/// Randomness consumed by one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Randomness {
    None,
    /// A symbol uniform on `[0, a)`.
    Uniform(u32),
    /// Symbol 1 with probability `p`, else 0.
    Bernoulli(f64),
}

pub trait KPassAlgorithm: Send + Sync {
    fn name(&self) -> String;
    fn passes(&self) -> usize;
    /// `s`, the memory budget in bits.
    fn memory_bits(&self) -> u32;
    fn initial_state(&self) -> u64;
    fn randomness(&self, _pass: usize, _j: usize) -> Randomness {
        Randomness::None
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, r: u32) -> u64;
    fn output(&self, state: u64) -> i64;
    /// Stream length the algorithm was built for, if it depends on one.
    fn declared_len(&self) -> Option<usize> {
        None
    }
}

/// Bits needed to write `code`; zero for code 0.
pub fn state_width(code: u64) -> u32 {
    64 - code.leading_zeros()
}

pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

pub fn unzigzag(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KPassError {
    #[error("state of width {width} bits at pass {pass}, item {j} exceeds the {limit}-bit budget")]
    StateOverflow { pass: usize, j: usize, width: u32, limit: u32 },
    #[error("stream has {got} items, algorithm expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Supplies the random symbol `r(i, j)`.
pub trait TapeSource {
    fn symbol(&mut self, pass: usize, j: usize, r: Randomness) -> u32;
}

fn sample_symbol<D: Draw>(d: &mut D, r: Randomness) -> u32 {
    match r {
        Randomness::None => 0,
        Randomness::Uniform(a) => d.below(a as u64) as u32,
        Randomness::Bernoulli(p) => d.bernoulli(p) as u32,
    }
}

/// Symbols drawn in order from any [`Draw`], including the enumeration tape.
pub struct Sequential<D>(pub D);

impl<D: Draw> TapeSource for Sequential<D> {
    fn symbol(&mut self, _pass: usize, _j: usize, r: Randomness) -> u32 {
        sample_symbol(&mut self.0, r)
    }
}

/// `r(i, j)` drawn from a generator keyed by `(seed, i, j)`.
#[derive(Debug, Clone, Copy)]
pub struct SeededTape(pub u64);

impl TapeSource for SeededTape {
    fn symbol(&mut self, pass: usize, j: usize, r: Randomness) -> u32 {
        let mut d = CounterRng::new(self.0, sid::ALG_TAPE, ((pass as u64) << 32) | j as u64);
        sample_symbol(&mut d, r)
    }
}

/// Replays a recorded tape, indexed `(i - 1)·n + (j - 1)`.
#[derive(Debug, Clone)]
pub struct RecordedTape<'a> {
    pub n: usize,
    pub symbols: &'a [u32],
}

impl TapeSource for RecordedTape<'_> {
    fn symbol(&mut self, pass: usize, j: usize, _r: Randomness) -> u32 {
        self.symbols[(pass - 1) * self.n + (j - 1)]
    }
}

/// Deterministic algorithms need no tape.
pub struct NoTape;

impl TapeSource for NoTape {
    fn symbol(&mut self, _pass: usize, _j: usize, r: Randomness) -> u32 {
        assert_eq!(r, Randomness::None, "randomized algorithm run without a tape");
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub k: usize,
    pub n: usize,
    /// Row-major `k × (n + 1)` grid of states, present when recorded.
    pub grid: Option<Vec<u64>>,
    /// `r(i, j)` at `(i - 1)·n + (j - 1)`.
    pub tape: Vec<u32>,
    pub final_state: u64,
    pub output: i64,
    /// Widest state seen during the run.
    pub peak_bits: u32,
}

impl Transcript {
    pub fn state(&self, pass: usize, j: usize) -> Option<u64> {
        self.grid.as_ref().map(|g| g[(pass - 1) * (self.n + 1) + j])
    }

    /// End state of pass `i`; `end_state(0)` is the initial state.
    pub fn end_state(&self, i: usize) -> Option<u64> {
        if i == 0 {
            self.state(1, 0)
        } else {
            self.state(i, self.n)
        }
    }
}

pub fn run_k_pass<A, T>(alg: &A, items: &[Item], record: bool, tape: &mut T) -> Result<Transcript, KPassError>
where
    A: KPassAlgorithm + ?Sized,
    T: TapeSource + ?Sized,
{
    let n = items.len();
    if let Some(expected) = alg.declared_len() {
        if expected != n {
            return Err(KPassError::LengthMismatch { expected, got: n });
        }
    }
    let k = alg.passes();
    let limit = alg.memory_bits();
    let mut grid = if record { Some(Vec::with_capacity(k * (n + 1))) } else { None };
    let mut symbols = vec![0u32; k * n];
    let mut state = alg.initial_state();
    let mut peak = state_width(state);
    if peak > limit {
        return Err(KPassError::StateOverflow { pass: 1, j: 0, width: peak, limit });
    }
    for pass in 1..=k {
        if let Some(g) = grid.as_mut() {
            g.push(state);
        }
        for (idx, &x) in items.iter().enumerate() {
            let j = idx + 1;
            let r = alg.randomness(pass, j);
            let sym = tape.symbol(pass, j, r);
            symbols[(pass - 1) * n + idx] = sym;
            state = alg.transition(pass, j, x, state, sym);
            let w = state_width(state);
            if w > limit {
                return Err(KPassError::StateOverflow { pass, j, width: w, limit });
            }
            peak = peak.max(w);
            if let Some(g) = grid.as_mut() {
                g.push(state);
            }
        }
    }
    Ok(Transcript { k, n, grid, tape: symbols, final_state: state, output: alg.output(state), peak_bits: peak })
}

/// Maximum encoded state width over the whole grid.
pub fn peak_memory_bits(t: &Transcript) -> u32 {
    match &t.grid {
        Some(g) => g.iter().map(|&s| state_width(s)).max().unwrap_or(0),
        None => t.peak_bits,
    }
}

/// Wraps an algorithm with one extra pass that leaves the state untouched.
#[derive(Debug, Clone)]
pub struct Frozen<A>(pub A);

impl<A: KPassAlgorithm> KPassAlgorithm for Frozen<A> {
    fn name(&self) -> String {
        format!("{}+frozen", self.0.name())
    }
    fn passes(&self) -> usize {
        self.0.passes() + 1
    }
    fn memory_bits(&self) -> u32 {
        self.0.memory_bits()
    }
    fn initial_state(&self) -> u64 {
        self.0.initial_state()
    }
    fn randomness(&self, pass: usize, j: usize) -> Randomness {
        if pass > self.0.passes() {
            Randomness::None
        } else {
            self.0.randomness(pass, j)
        }
    }
    fn transition(&self, pass: usize, j: usize, x: Item, state: u64, r: u32) -> u64 {
        if pass > self.0.passes() {
            state
        } else {
            self.0.transition(pass, j, x, state, r)
        }
    }
    fn output(&self, state: u64) -> i64 {
        self.0.output(state)
    }
    fn declared_len(&self) -> Option<usize> {
        self.0.declared_len()
    }
}

/// True if no transition of the last pass changes the state, checked over
/// every state code up to `max_state`, every symbol of `alphabet` and every
/// random symbol.
pub fn last_pass_is_frozen<A: KPassAlgorithm + ?Sized>(alg: &A, n: usize, alphabet: &[Item], max_state: u64) -> bool {
    let k = alg.passes();
    (1..=n).all(|j| {
        let symbols: Vec<u32> = match alg.randomness(k, j) {
            Randomness::None => vec![0],
            Randomness::Uniform(a) => (0..a).collect(),
            Randomness::Bernoulli(_) => vec![0, 1],
        };
        (0..=max_state).all(|s| alphabet.iter().all(|&x| symbols.iter().all(|&r| alg.transition(k, j, x, s, r) == s)))
    })
}

#[cfg(test)]
mod tests {
    use super::zoo::*;
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(state_width(0), 0);
        assert_eq!(state_width(1), 1);
        assert_eq!(state_width(255), 8);
        assert_eq!(state_width(256), 9);
    }

    #[test]
    fn zigzag_roundtrip() {
        for v in [-5i64, -1, 0, 1, 7, i64::MIN / 2] {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
    }

    #[test]
    fn constant_never_moves() {
        let alg = Constant { k: 2 };
        let t = run_k_pass(&alg, &[1, -1, 1], true, &mut NoTape).unwrap();
        assert!(t.grid.as_ref().unwrap().iter().all(|&s| s == alg.initial_state()));
        assert_eq!(peak_memory_bits(&t), state_width(alg.initial_state()));
    }

    #[test]
    fn exact_sum_example() {
        let alg = ExactSum::new(1, 3);
        let t = run_k_pass(&alg, &[1, -1, 1], false, &mut NoTape).unwrap();
        assert_eq!(t.output, 1);
        assert_eq!(unzigzag(t.final_state), 1);
        assert!(t.grid.is_none());
    }

    #[test]
    fn counter_peak_width() {
        let alg = Counter { n: 255 };
        let items = vec![1; 255];
        let t = run_k_pass(&alg, &items, true, &mut NoTape).unwrap();
        assert_eq!(peak_memory_bits(&t), 8);
        assert_eq!(t.peak_bits, 8);
    }

    #[test]
    fn overflow_is_reported() {
        let alg = Counter { n: 3 };
        let err = run_k_pass(&alg, &[1; 4], true, &mut NoTape).unwrap_err();
        assert_eq!(err, KPassError::LengthMismatch { expected: 3, got: 4 });
        let tight = TableAlgorithm::parse("passes 1\nstates 4\nbits 1\nalphabet 1\ninitial 0\nrow * 0 1 1\nrow * 1 1 2\n").unwrap();
        let err = run_k_pass(&tight, &[1, 1], true, &mut NoTape).unwrap_err();
        assert_eq!(err, KPassError::StateOverflow { pass: 1, j: 2, width: 2, limit: 1 });
    }

    #[test]
    fn handoff_holds() {
        let alg = SumMod { k: 3, bits: 2 };
        let items = [1, 1, -1, 1, 1];
        let t = run_k_pass(&alg, &items, true, &mut NoTape).unwrap();
        for i in 1..3 {
            assert_eq!(t.state(i + 1, 0), t.state(i, items.len()));
        }
    }

    #[test]
    fn replay_reproduces_randomized_runs() {
        let alg = NoisyStore { k: 2 };
        for seed in 0..20 {
            let items = [1, -1, 1];
            let a = run_k_pass(&alg, &items, true, &mut SeededTape(seed)).unwrap();
            let b = run_k_pass(&alg, &items, true, &mut RecordedTape { n: 3, symbols: &a.tape }).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn frozen_wrapper() {
        let alg = Frozen(ToyCollision { t: 3 });
        assert_eq!(alg.passes(), 2);
        assert!(last_pass_is_frozen(&alg, 3, &[1, 2, 3], 1 << alg.memory_bits()));
        assert!(!last_pass_is_frozen(&ToyCollision { t: 3 }, 3, &[1, 2, 3], 7));
        let t = run_k_pass(&alg, &[2, 1, 2], true, &mut NoTape).unwrap();
        assert_eq!(t.output, 1);
        assert_eq!(t.state(2, 3), t.state(1, 3));
    }
}
