//! Input distributions: uniform and needle streams, local needles, coin
//! streams, strict-turnstile counters, interleaved coin instances and the
//! mostly-equal vectors.
//!
//! Every generator comes in two forms. A pull iterator ([`Source`]) draws item
//! `j` from its own counter-keyed RNG so long streams never materialize, and a
//! `sample_*` function consumes a single [`Draw`] so the exact law of the
//! generator can be enumerated on small parameters.

mod format;
mod tcoins;

pub use format::{read_binary, read_text, write_binary, write_text, BinaryHeader, MAGIC};
pub use tcoins::{gen_t_coins, is_good, round_robin, GoodOrder, OrderSpec};

use serde::{Deserialize, Serialize};

use crate::rng::{streams as sid, CounterRng, Draw};

pub type Item = i64;

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("order has length {got}, expected {expected}")]
    OrderLength { expected: usize, got: usize },
    #[error("malformed stream file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Domain size `t`, stream length `n` and needle probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedleParams {
    pub t: u64,
    pub n: u64,
    pub p: f64,
}

impl NeedleParams {
    pub fn new(t: u64, n: u64, p: f64) -> Result<Self, StreamError> {
        let params = NeedleParams { t, n, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.t < 1 {
            return Err(StreamError::InvalidParams("t must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(StreamError::InvalidParams(format!("p = {} outside [0, 1]", self.p)));
        }
        Ok(())
    }

    /// `n ≤ t/100`, the sparsity regime the detectors are analysed in.
    pub fn is_sparse(&self) -> bool {
        self.n.saturating_mul(100) <= self.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Uniform,
    Needle {
        alpha: Item,
    },
    /// Positions (1-based) that carry the needle with probability 1/2.
    LocalNeedle {
        alpha: Item,
        positions: Vec<usize>,
    },
    CoinBits,
    StrictTurnstile {
        prefix: u64,
        went_negative: bool,
    },
    TCoins {
        order: Vec<u32>,
    },
}

impl Label {
    /// Ground truth for a needle detector: 1 iff a needle was planted.
    pub fn truth(&self) -> Option<u8> {
        match self {
            Label::Uniform => Some(0),
            Label::Needle { .. } | Label::LocalNeedle { .. } => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub items: Vec<Item>,
    pub label: Label,
    pub seed: u64,
    pub t: u64,
    pub p: f64,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn uniform_item<D: Draw + ?Sized>(t: u64, d: &mut D) -> Item {
    1 + d.below(t) as Item
}

pub fn needle_item<D: Draw + ?Sized>(t: u64, p: f64, alpha: Item, d: &mut D) -> Item {
    if d.bernoulli(p) {
        alpha
    } else {
        uniform_item(t, d)
    }
}

pub fn coin_item<D: Draw + ?Sized>(d: &mut D) -> Item {
    if d.below(2) == 1 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Uniform,
    Needle { alpha: Item },
    LocalNeedle { alpha: Item, mask: Vec<bool> },
    Coin,
}

/// Pull iterator over a generated stream.
///
/// Item `j` depends only on `(seed, j)`; distinct sources can be consumed on
/// distinct threads.
#[derive(Debug, Clone)]
pub struct Source {
    kind: Kind,
    t: u64,
    n: u64,
    p: f64,
    seed: u64,
    j: u64,
}

fn draw_alpha(t: u64, seed: u64) -> Item {
    uniform_item(t, &mut CounterRng::new(seed, sid::ALPHA, 0))
}

impl Source {
    pub fn uniform(params: NeedleParams, seed: u64) -> Self {
        Source { kind: Kind::Uniform, t: params.t, n: params.n, p: params.p, seed, j: 0 }
    }

    pub fn needle(params: NeedleParams, seed: u64) -> Self {
        let alpha = draw_alpha(params.t, seed);
        Source { kind: Kind::Needle { alpha }, t: params.t, n: params.n, p: params.p, seed, j: 0 }
    }

    /// `positions` are 1-based and must lie in `[1, n]`.
    pub fn local_needle(params: NeedleParams, positions: &[usize], seed: u64) -> Result<Self, StreamError> {
        let mut mask = vec![false; params.n as usize];
        for &s in positions {
            if s == 0 || s as u64 > params.n {
                return Err(StreamError::InvalidParams(format!("position {s} outside [1, {}]", params.n)));
            }
            mask[s - 1] = true;
        }
        let alpha = draw_alpha(params.t, seed);
        Ok(Source { kind: Kind::LocalNeedle { alpha, mask }, t: params.t, n: params.n, p: params.p, seed, j: 0 })
    }

    pub fn coin(n: u64, seed: u64) -> Self {
        Source { kind: Kind::Coin, t: 2, n, p: 0.0, seed, j: 0 }
    }

    /// The planted needle. Oracle-side only.
    pub fn alpha(&self) -> Option<Item> {
        match &self.kind {
            Kind::Needle { alpha } | Kind::LocalNeedle { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    pub fn label(&self) -> Label {
        match &self.kind {
            Kind::Uniform => Label::Uniform,
            Kind::Needle { alpha } => Label::Needle { alpha: *alpha },
            Kind::LocalNeedle { alpha, mask } => {
                Label::LocalNeedle { alpha: *alpha, positions: mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect() }
            }
            Kind::Coin => Label::CoinBits,
        }
    }

    pub fn params(&self) -> NeedleParams {
        NeedleParams { t: self.t, n: self.n, p: self.p }
    }

    pub fn collect_labeled(self) -> LabeledStream {
        let label = self.label();
        let (seed, t, p) = (self.seed, self.t, self.p);
        LabeledStream { items: self.collect(), label, seed, t, p }
    }
}

impl Iterator for Source {
    type Item = Item;

    fn next(&mut self) -> Option<Item> {
        if self.j >= self.n {
            return None;
        }
        let j = self.j;
        self.j += 1;
        let mut d = CounterRng::new(self.seed, sid::ITEMS, j);
        Some(match &self.kind {
            Kind::Uniform => uniform_item(self.t, &mut d),
            Kind::Needle { alpha } => needle_item(self.t, self.p, *alpha, &mut d),
            Kind::LocalNeedle { alpha, mask } => {
                if mask[j as usize] {
                    needle_item(self.t, 0.5, *alpha, &mut d)
                } else {
                    uniform_item(self.t, &mut d)
                }
            }
            Kind::Coin => coin_item(&mut d),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.n - self.j) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Source {}

pub fn gen_uniform(params: NeedleParams, seed: u64) -> LabeledStream {
    Source::uniform(params, seed).collect_labeled()
}

pub fn gen_needle(params: NeedleParams, seed: u64) -> LabeledStream {
    Source::needle(params, seed).collect_labeled()
}

pub fn gen_local_needle(params: NeedleParams, positions: &[usize], seed: u64) -> Result<LabeledStream, StreamError> {
    Ok(Source::local_needle(params, positions, seed)?.collect_labeled())
}

pub fn gen_coin(n: u64, seed: u64) -> LabeledStream {
    Source::coin(n, seed).collect_labeled()
}

/// `⌈C√n⌉` updates of `+1` followed by `n` fair coins. The label records
/// whether the running sum ever drops below zero.
pub fn gen_strict_turnstile_counter(n: u64, c: f64, seed: u64) -> Result<LabeledStream, StreamError> {
    if !c.is_finite() || c < 0.0 {
        return Err(StreamError::InvalidParams(format!("C = {c} must be finite and non-negative")));
    }
    let prefix = (c * (n as f64).sqrt()).ceil() as u64;
    let mut items: Vec<Item> = vec![1; prefix as usize];
    items.extend(Source::coin(n, seed));
    let mut sum = 0i64;
    let mut went_negative = false;
    for &x in &items {
        sum += x;
        went_negative |= sum < 0;
    }
    Ok(LabeledStream { items, label: Label::StrictTurnstile { prefix, went_negative }, seed, t: 2, p: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MostlyEqDist {
    /// Every coordinate uniform on `[1, t]`.
    Uniform,
    /// A hidden `α`; every coordinate equals it with probability 1/2.
    MostlyEqual,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MostlyEqSample {
    pub z: Vec<Item>,
    pub alpha: Option<Item>,
}

pub fn sample_mostlyeq<D: Draw>(m: usize, t: u64, which: MostlyEqDist, d: &mut D) -> MostlyEqSample {
    match which {
        MostlyEqDist::Uniform => MostlyEqSample { z: (0..m).map(|_| uniform_item(t, d)).collect(), alpha: None },
        MostlyEqDist::MostlyEqual => {
            let alpha = uniform_item(t, d);
            MostlyEqSample { z: (0..m).map(|_| needle_item(t, 0.5, alpha, d)).collect(), alpha: Some(alpha) }
        }
    }
}

pub fn gen_mostlyeq(m: usize, t: u64, which: MostlyEqDist, seed: u64) -> Result<MostlyEqSample, StreamError> {
    if m < 1 || t < 1 {
        return Err(StreamError::InvalidParams("m and t must be at least 1".into()));
    }
    let mut d = CounterRng::new(seed, sid::ITEMS, 0);
    Ok(sample_mostlyeq(m, t, which, &mut d))
}

/// Single-tape version of [`gen_uniform`] for exact enumeration.
pub fn sample_uniform<D: Draw>(params: NeedleParams, d: &mut D) -> Vec<Item> {
    (0..params.n).map(|_| uniform_item(params.t, d)).collect()
}

/// Single-tape version of [`gen_needle`]; returns the items and `α`.
pub fn sample_needle<D: Draw>(params: NeedleParams, d: &mut D) -> (Vec<Item>, Item) {
    let alpha = uniform_item(params.t, d);
    ((0..params.n).map(|_| needle_item(params.t, params.p, alpha, d)).collect(), alpha)
}

/// Single-tape version of [`gen_local_needle`].
pub fn sample_local_needle<D: Draw>(params: NeedleParams, positions: &[usize], d: &mut D) -> (Vec<Item>, Item) {
    let alpha = uniform_item(params.t, d);
    let items = (1..=params.n as usize)
        .map(|j| if positions.contains(&j) { needle_item(params.t, 0.5, alpha, d) } else { uniform_item(params.t, d) })
        .collect();
    (items, alpha)
}

pub fn sample_coin<D: Draw>(n: u64, d: &mut D) -> Vec<Item> {
    (0..n).map(|_| coin_item(d)).collect()
}
