//! Detector for sparse needles, `p ≤ 1/√(n·log³n)`, in the plain streaming
//! model.
//!
//! The domain `[1, t]` is split into `⌈1/(p²n)⌉` blocks, each with its own
//! sub-detector, and the stream into `round(pn)` groups of Poisson(`1/(4p)`)
//! items. A sub-detector opens `C2 = 1000·C1` counters per group; the
//! detector says 1 as soon as any counter reaches lifespan `K_out·log n`.
//!
//! Counters with `c3 = 0` are not stored. Within a cohort they all share
//! `c2`, so they live or die together and a single frontier register (the
//! oldest cohort whose zero counters are alive) encodes them for every
//! block at once. A zero counter is materialized on its first hit. The
//! meter charges the group index, the frontier and each stored counter.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use super::{c2_from, counter_bits, width, AbortReason, Detection, Hashes, Lifetimes, NeedleError, Retention, Verdict};
use crate::rng::{streams as sid, CounterRng};
use crate::streams::{Item, NeedleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2Config {
    pub c1: f64,
    pub retention: Retention,
    /// Output lifespan threshold in units of `log n`.
    pub kout: f64,
    /// Mean group size in units of `1/p`.
    pub group_rate: f64,
    /// Abort when the meter exceeds this many bits.
    pub mem_cap_bits: Option<u64>,
}

impl Default for M2Config {
    fn default() -> Self {
        M2Config { c1: 6.0, retention: Retention { num: 1, den: 100, grace: 10_000 }, kout: 3e6, group_rate: 0.25, mem_cap_bits: None }
    }
}

impl M2Config {
    /// `C2 = 1000·C1`.
    pub fn c2(&self) -> Result<u32, NeedleError> {
        c2_from(self.c1, 1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2Layout {
    pub blocks: u64,
    pub block_width: u64,
    pub groups: u64,
    /// Poisson mean of a group's size.
    pub group_mean: f64,
    /// Inclusion rate of `h1` within a block, `C1/(pn)` capped at 1.
    pub density: f64,
    /// Lifespan at which a counter fires.
    pub fire_at: f64,
}

impl M2Layout {
    pub fn new(params: NeedleParams, cfg: &M2Config) -> Result<Self, NeedleError> {
        let (t, n, p) = (params.t, params.n as f64, params.p);
        if !(p > 0.0) {
            return Err(NeedleError::ZeroRate);
        }
        if !(cfg.group_rate > 0.0) || !(cfg.kout >= 0.0) {
            return Err(NeedleError::Config("group_rate must be positive and kout non-negative".into()));
        }
        let blocks = (1.0 / (p * p * n)).ceil().max(1.0) as u64;
        let block_width = t.div_ceil(blocks).max(1);
        let groups = (p * n).round().max(1.0) as u64;
        Ok(M2Layout {
            blocks,
            block_width,
            groups,
            group_mean: cfg.group_rate / p,
            density: (cfg.c1 / (p * n)).min(1.0),
            fire_at: cfg.kout * n.max(2.0).log2(),
        })
    }

    /// Block of item `x ∈ [1, t]`, 0-based.
    pub fn block(&self, x: Item) -> u64 {
        (x.max(1) as u64 - 1) / self.block_width
    }

    /// Bits of a stored counter with `buckets` hash values and fields up to
    /// the group count, used to size caps.
    pub fn counter_width(&self, buckets: u32) -> u64 {
        counter_bits(buckets, self.groups as u32, self.groups as u32)
    }
}

/// Size of group `g`: the smallest `k` with `F(k) ≥ u` for the Poisson CDF.
pub fn group_size(mean: f64, seed: u64, g: u64) -> u64 {
    let u = CounterRng::new(seed, sid::GROUPS, g).unit();
    let poisson = Poisson::new(mean).expect("positive mean");
    let (mut lo, mut hi) = (0u64, mean.ceil() as u64 + 1);
    if poisson.cdf(0) >= u {
        return 0;
    }
    while poisson.cdf(hi) < u {
        lo = hi;
        hi *= 2;
    }
    // F(lo) < u ≤ F(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if poisson.cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy)]
struct Stored {
    c3: u32,
    /// Last group that counted an item.
    last: u64,
}

struct Engine<'a> {
    cfg: &'a M2Config,
    layout: M2Layout,
    hashes: Hashes,
    keys: Vec<u64>,
    /// Cohorts `g ≥ frontier` still hold their zero counters (1-based).
    frontier: u64,
    stored: HashMap<(u64, u64, u32), Stored>,
    per_cohort: Vec<u32>,
    peak_bits: u64,
    peak_counters: u64,
}

impl Engine<'_> {
    fn zeros_alive(&self, g: u64) -> bool {
        g >= self.frontier
    }

    fn feed(&mut self, i: u64, x: Item) {
        let hx = self.hashes.item(x);
        let block = self.layout.block(x);
        let mut bucket = None;
        for g in 1..=i {
            let gi = g as usize;
            if !self.zeros_alive(g) && self.per_cohort[gi] == 0 {
                continue;
            }
            if !self.hashes.member(hx, self.keys[gi]) {
                continue;
            }
            let b = *bucket.get_or_insert_with(|| self.hashes.bucket(x));
            let zeros = self.zeros_alive(g);
            match self.stored.get_mut(&(block, g, b)) {
                Some(s) if s.last != i => {
                    s.c3 += 1;
                    s.last = i;
                }
                Some(_) => {}
                None if zeros => {
                    self.stored.insert((block, g, b), Stored { c3: 1, last: i });
                    self.per_cohort[gi] += 1;
                }
                None => {}
            }
        }
    }

    fn bits(&self, i: u64) -> u64 {
        let registers = 2 * width(self.layout.groups) as u64;
        registers + self.stored.iter().map(|(&(_, g, c1), s)| counter_bits(c1, (i - g) as u32, s.c3)).sum::<u64>()
    }

    /// Meters, prunes and ages the memory after group `i`. Returns the
    /// largest lifespan among survivors.
    fn close(&mut self, i: u64, mut dropped: impl FnMut(u32)) -> Option<u64> {
        let bits = self.bits(i);
        self.peak_bits = self.peak_bits.max(bits);
        self.peak_counters = self.peak_counters.max(self.stored.len() as u64);
        let r = self.cfg.retention;
        let per_cohort = &mut self.per_cohort;
        self.stored.retain(|&(_, g, _), s| {
            let keep = r.keeps((i - g) as u32, s.c3);
            if !keep {
                dropped((i - g) as u32);
                per_cohort[g as usize] -= 1;
            }
            keep
        });
        // Zero counters of cohort g survive iff c2 = i - g ≤ grace, unless a
        // zero ratio keeps everything.
        if r.num > 0 {
            self.frontier = self.frontier.max(i.saturating_sub(r.grace as u64));
        }
        let oldest_stored = self.stored.keys().map(|&(_, g, _)| g).min();
        let oldest_zero = (self.frontier <= i).then_some(self.frontier);
        let oldest = match (oldest_stored, oldest_zero) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        oldest.map(|g| i - g + 1)
    }
}

fn build<'a>(params: NeedleParams, cfg: &'a M2Config, seed: u64) -> Result<Engine<'a>, NeedleError> {
    let layout = M2Layout::new(params, cfg)?;
    let c2 = cfg.c2()?;
    let hashes = Hashes::new(seed, layout.density, c2);
    let cohorts = layout.groups as usize + 1;
    Ok(Engine {
        cfg,
        layout,
        hashes,
        keys: (0..cohorts as u64).map(|g| hashes.group(g)).collect(),
        frontier: 1,
        stored: HashMap::new(),
        per_cohort: vec![0; cohorts],
        peak_bits: 0,
        peak_counters: 0,
    })
}

/// Runs the composed detector.
pub fn m2_run<I: IntoIterator<Item = Item>>(items: I, params: NeedleParams, cfg: &M2Config, seed: u64) -> Result<Detection, NeedleError> {
    let mut e = build(params, cfg, seed)?;
    let mut items = items.into_iter();
    let mut read = 0u64;
    let finish = |e: &Engine, verdict, abort, read, groups| Detection {
        verdict,
        abort,
        peak_bits: e.peak_bits,
        peak_counters: e.peak_counters,
        items_read: read,
        groups,
    };
    for i in 1..=e.layout.groups {
        let size = group_size(e.layout.group_mean, seed, i);
        for _ in 0..size {
            let Some(x) = items.next() else {
                return Ok(finish(&e, Verdict::Abort, Some(AbortReason::Exhausted), read, i - 1));
            };
            read += 1;
            e.feed(i, x);
        }
        let oldest = e.close(i, |_| {});
        if cfg.mem_cap_bits.is_some_and(|cap| e.peak_bits > cap) {
            return Ok(finish(&e, Verdict::Abort, Some(AbortReason::MemoryCap), read, i));
        }
        if oldest.is_some_and(|c2| c2 as f64 >= e.layout.fire_at) {
            return Ok(finish(&e, Verdict::One, None, read, i));
        }
    }
    let groups = e.layout.groups;
    Ok(finish(&e, Verdict::Zero, None, read, groups))
}

/// Lifetimes of the stored counters of every sub-detector, with retention
/// only. Zero counters that never saw an item are not included.
pub fn m2_observe<I: IntoIterator<Item = Item>>(
    items: I,
    params: NeedleParams,
    cfg: &M2Config,
    seed: u64,
) -> Result<Lifetimes, NeedleError> {
    let mut e = build(params, cfg, seed)?;
    let mut items = items.into_iter();
    let mut life = Lifetimes::default();
    'groups: for i in 1..=e.layout.groups {
        let size = group_size(e.layout.group_mean, seed, i);
        for _ in 0..size {
            let Some(x) = items.next() else { break 'groups };
            e.feed(i, x);
        }
        e.close(i, |l| life.dropped.push(l));
        if i == e.layout.groups {
            life.censored.extend(e.stored.keys().map(|&(_, g, _)| (i - g + 1) as u32));
        }
    }
    Ok(life)
}
