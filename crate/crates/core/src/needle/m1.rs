//! Detector for `p ≥ 1/√n` in the clocked model.
//!
//! The first `n' = min(n, 1/p²)` items are cut into `⌊n'/⌊√n'⌋⌋` groups of
//! `⌊√n'⌋`. Each group opens a cohort of `C2` counters, one per `h2` value;
//! a counter born in group `g` counts, at most once per group, items of
//! `h1(g)` whose `h2` equals its hash value. A counter old enough to be
//! tracked is followed alone for `10·log n'` groups and the detector says 1
//! if it keeps `c3 ≥ c2/3` throughout.
//!
//! When the retention grace exceeds the tracking threshold, every counter
//! would reach the threshold; such counters that fail the ratio test are
//! dropped one by one instead of starting a doomed track that clears all
//! memory. Below the grace the rule never fires.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{c2_from, Detection, Hashes, Lifetimes, NeedleError, Retention, TrackCounter, Verdict};
use crate::streams::{Item, NeedleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M1Config {
    pub c1: f64,
    /// Lifespan that starts tracking; `⌈10·log log n'⌉` when unset.
    pub track_threshold: Option<u32>,
    /// Length of a track in groups; `⌈10·log n'⌉` when unset.
    pub track_rounds: Option<u32>,
    pub retention: Retention,
}

impl Default for M1Config {
    fn default() -> Self {
        M1Config { c1: 6.0, track_threshold: None, track_rounds: None, retention: Retention { num: 1, den: 3, grace: 100 } }
    }
}

impl M1Config {
    /// `C2 = 100·C1`.
    pub fn c2(&self) -> Result<u32, NeedleError> {
        c2_from(self.c1, 100.0)
    }

    pub fn threshold(&self, n_eff: u64) -> u32 {
        self.track_threshold.unwrap_or_else(|| {
            let ll = (n_eff.max(2) as f64).log2().max(1.0).log2();
            (10.0 * ll).ceil().max(1.0) as u32
        })
    }

    pub fn rounds(&self, n_eff: u64) -> u32 {
        self.track_rounds.unwrap_or_else(|| (10.0 * (n_eff.max(2) as f64).log2()).ceil() as u32)
    }
}

/// Group geometry shared by the run and observe modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M1Layout {
    pub n_eff: u64,
    pub group_size: u64,
    pub groups: u64,
    /// Inclusion rate of `h1`, `C1/√n'` capped at 1.
    pub density: f64,
}

impl M1Layout {
    pub fn new(params: NeedleParams, cfg: &M1Config) -> Result<Self, NeedleError> {
        let (n, p) = (params.n, params.p);
        if n > 0 && p * p * (n as f64) < 1.0 - 1e-9 {
            return Err(NeedleError::TooSparse { p, n });
        }
        let n_eff = if p > 0.0 { n.min((1.0 / (p * p)).floor() as u64) } else { n };
        let group_size = (n_eff as f64).sqrt().floor() as u64;
        let groups = n_eff.checked_div(group_size).unwrap_or(0);
        let density = if n_eff == 0 { 1.0 } else { (cfg.c1 / (n_eff as f64).sqrt()).min(1.0) };
        Ok(M1Layout { n_eff, group_size, groups, density })
    }
}

struct Cohort {
    key: u64,
    /// Sorted by `c1`; counters leave individually.
    counters: Vec<TrackCounter>,
}

#[derive(Default)]
struct Meter {
    peak_bits: u64,
    peak_counters: u64,
}

impl Meter {
    fn observe<'a>(&mut self, counters: impl Iterator<Item = &'a TrackCounter>) {
        let (mut bits, mut count) = (0, 0);
        for c in counters {
            bits += c.bits();
            count += 1;
        }
        self.peak_bits = self.peak_bits.max(bits);
        self.peak_counters = self.peak_counters.max(count);
    }
}

struct Scan {
    hashes: Hashes,
    c2: u32,
    cohorts: VecDeque<Cohort>,
}

impl Scan {
    fn open(&mut self, g: u64) {
        let counters = (1..=self.c2).map(TrackCounter::new).collect();
        self.cohorts.push_back(Cohort { key: self.hashes.group(g), counters });
    }

    fn feed(&mut self, x: Item) {
        let hx = self.hashes.item(x);
        let mut bucket = None;
        for c in &mut self.cohorts {
            if self.hashes.member(hx, c.key) {
                let b = *bucket.get_or_insert_with(|| self.hashes.bucket(x));
                if let Ok(i) = c.counters.binary_search_by_key(&b, |k| k.c1) {
                    c.counters[i].hit();
                }
            }
        }
    }

    /// Prunes, ages every survivor by one round and reports each drop.
    fn close(&mut self, retention: &Retention, meter: &mut Meter, mut dropped: impl FnMut(u32)) {
        meter.observe(self.cohorts.iter().flat_map(|c| &c.counters));
        for cohort in &mut self.cohorts {
            cohort.counters.retain_mut(|k| {
                let keep = retention.keeps(k.c2, k.c3);
                if keep {
                    k.c2 += 1;
                    k.updated = false;
                } else {
                    dropped(k.c2);
                }
                keep
            });
        }
        self.cohorts.retain(|c| !c.counters.is_empty());
    }

    /// Takes the first counter at or past `threshold` that meets the ratio;
    /// others at the threshold are dropped.
    fn promote(&mut self, threshold: u32, retention: &Retention) -> Option<(u64, TrackCounter)> {
        let mut found = None;
        for cohort in &mut self.cohorts {
            if cohort.counters.first().is_none_or(|k| k.c2 < threshold) {
                continue;
            }
            cohort.counters.retain(|k| {
                if found.is_none() && retention.ratio_holds(k.c2, k.c3) {
                    found = Some((cohort.key, *k));
                }
                false
            });
            if found.is_some() {
                break;
            }
        }
        self.cohorts.retain(|c| !c.counters.is_empty());
        found
    }
}

enum Mode {
    Scanning,
    Tracking { key: u64, counter: TrackCounter, done: u32 },
}

fn grouped<I: IntoIterator<Item = Item>>(items: I, layout: &M1Layout) -> impl Iterator<Item = (u64, bool, Item)> {
    let size = layout.group_size.max(1);
    let total = layout.groups * layout.group_size;
    items.into_iter().take(total as usize).enumerate().map(move |(idx, x)| {
        let idx = idx as u64;
        (idx / size + 1, (idx + 1).is_multiple_of(size), x)
    })
}

/// Runs the detector on the first `n'` items.
pub fn m1_run<I: IntoIterator<Item = Item>>(items: I, params: NeedleParams, cfg: &M1Config, seed: u64) -> Result<Detection, NeedleError> {
    let layout = M1Layout::new(params, cfg)?;
    let c2 = cfg.c2()?;
    let threshold = cfg.threshold(layout.n_eff);
    let rounds = cfg.rounds(layout.n_eff);
    let ratio_only = Retention { grace: 0, ..cfg.retention };
    let mut scan = Scan { hashes: Hashes::new(seed, layout.density, c2), c2, cohorts: VecDeque::new() };
    let mut meter = Meter::default();
    let mut mode = Mode::Scanning;
    let mut read = 0u64;
    let mut verdict = Verdict::Zero;
    let mut groups = 0;

    for (g, last, x) in grouped(items, &layout) {
        read += 1;
        let first = (read - 1).is_multiple_of(layout.group_size);
        match &mut mode {
            Mode::Scanning => {
                if first {
                    scan.open(g);
                }
                scan.feed(x);
            }
            Mode::Tracking { key, counter, .. } => {
                let h = &scan.hashes;
                if h.member(h.item(x), *key) && h.bucket(x) == counter.c1 {
                    counter.hit();
                }
            }
        }
        if !last {
            continue;
        }
        groups = g;
        match &mut mode {
            Mode::Scanning => {
                scan.close(&cfg.retention, &mut meter, |_| {});
                if let Some((key, counter)) = scan.promote(threshold, &cfg.retention) {
                    scan.cohorts.clear();
                    mode = Mode::Tracking { key, counter, done: 0 };
                }
            }
            Mode::Tracking { counter, done, .. } => {
                meter.observe(std::iter::once(&*counter));
                if ratio_only.ratio_holds(counter.c2, counter.c3) {
                    counter.c2 += 1;
                    counter.updated = false;
                    *done += 1;
                    if *done >= rounds {
                        verdict = Verdict::One;
                        break;
                    }
                } else {
                    mode = Mode::Scanning;
                }
            }
        }
    }
    Ok(Detection { verdict, abort: None, peak_bits: meter.peak_bits, peak_counters: meter.peak_counters, items_read: read, groups })
}

/// Runs the counter mechanics with retention only, no tracking, and records
/// how many rounds each counter survived.
pub fn m1_observe<I: IntoIterator<Item = Item>>(
    items: I,
    params: NeedleParams,
    cfg: &M1Config,
    seed: u64,
) -> Result<Lifetimes, NeedleError> {
    let layout = M1Layout::new(params, cfg)?;
    let c2 = cfg.c2()?;
    let mut scan = Scan { hashes: Hashes::new(seed, layout.density, c2), c2, cohorts: VecDeque::new() };
    let mut meter = Meter::default();
    let mut life = Lifetimes::default();
    let mut read = 0u64;
    for (g, last, x) in grouped(items, &layout) {
        if read.is_multiple_of(layout.group_size) {
            scan.open(g);
        }
        read += 1;
        scan.feed(x);
        if last {
            scan.close(&cfg.retention, &mut meter, |l| life.dropped.push(l));
        }
    }
    life.censored.extend(scan.cohorts.iter().flat_map(|c| c.counters.iter().map(|k| k.c2)));
    Ok(life)
}
