use super::{coin_item, Item, Label, LabeledStream, StreamError};
use crate::rng::{streams as sid, CounterRng, Draw};

/// How the `t` coin instances are interleaved.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderSpec {
    /// `s_j = ((j - 1) mod t) + 1`.
    RoundRobin,
    /// Every `s_j` independently uniform on `[1, t]`.
    Random,
    Explicit(Vec<u32>),
}

/// An interleaving `s_1..s_{nt}` with its per-instance position maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodOrder {
    pub n: usize,
    pub t: usize,
    pub s: Vec<u32>,
    /// `positions[s - 1][u - 1] = q_s(u)`, 1-based stream positions.
    pub positions: Vec<Vec<usize>>,
}

impl GoodOrder {
    pub fn new(n: usize, t: usize, s: Vec<u32>) -> Result<Self, StreamError> {
        if s.len() != n * t {
            return Err(StreamError::OrderLength { expected: n * t, got: s.len() });
        }
        let mut positions = vec![Vec::new(); t];
        for (j, &label) in s.iter().enumerate() {
            if label == 0 || label as usize > t {
                return Err(StreamError::InvalidParams(format!("label {label} outside [1, {t}]")));
            }
            positions[label as usize - 1].push(j + 1);
        }
        Ok(GoodOrder { n, t, s, positions })
    }

    /// `q_s(u)`.
    pub fn q(&self, s: usize, u: usize) -> usize {
        self.positions[s - 1][u - 1]
    }

    /// Both spacing conditions: every instance owns at least `n/2` updates,
    /// and for `√n ≤ u < v ≤ |J_s|`, `q_s(v) - q_s(v-u) ≥ (k/2)·u`.
    pub fn is_good(&self, k: usize) -> bool {
        let min_gap = (self.n as f64).sqrt().ceil() as usize;
        self.positions.iter().all(|q| {
            if 2 * q.len() < self.n {
                return false;
            }
            // With d(v) = q(v) - (k/2)v the condition reads d(v) ≥ d(a) for every
            // a ≤ v - ⌈√n⌉, so a running prefix maximum suffices.
            let d = |v: usize| q[v - 1] as f64 - 0.5 * k as f64 * v as f64;
            let mut best = f64::NEG_INFINITY;
            for v in (min_gap.max(1) + 1)..=q.len() {
                best = best.max(d(v - min_gap.max(1)));
                if d(v) < best {
                    return false;
                }
            }
            true
        })
    }
}

pub fn round_robin(n: usize, t: usize) -> Vec<u32> {
    (0..n * t).map(|j| (j % t) as u32 + 1).collect()
}

pub fn is_good(order: &[u32], n: usize, t: usize, k: usize) -> Result<bool, StreamError> {
    Ok(GoodOrder::new(n, t, order.to_vec())?.is_good(k))
}

/// `nt` updates `(X_j, s_j)`; the coins are the items, the labels go in the
/// stream label.
pub fn gen_t_coins(n: usize, t: usize, order: &OrderSpec, seed: u64) -> Result<(LabeledStream, GoodOrder), StreamError> {
    if n < 1 || t < 1 {
        return Err(StreamError::InvalidParams("n and t must be at least 1".into()));
    }
    let s = match order {
        OrderSpec::RoundRobin => round_robin(n, t),
        OrderSpec::Random => (0..(n * t) as u64).map(|j| 1 + CounterRng::new(seed, sid::ORDER, j).below(t as u64) as u32).collect(),
        OrderSpec::Explicit(s) => s.clone(),
    };
    let order = GoodOrder::new(n, t, s)?;
    let items: Vec<Item> = (0..(n * t) as u64).map(|j| coin_item(&mut CounterRng::new(seed, sid::COINS, j))).collect();
    let stream = LabeledStream { items, label: Label::TCoins { order: order.s.clone() }, seed, t: 2, p: 0.0 };
    Ok((stream, order))
}
