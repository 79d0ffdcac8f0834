//! Monte Carlo experiments on the approximate sum and on majority through the
//! one-pass simulation.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::{trial_seeds, Check, HarnessError};
use crate::apr::{AprConfig, AprState};
use crate::kpass::zoo::ExactSum;
use crate::rng::{streams as sid, CounterRng, Draw};
use crate::simulate::{build_conditional_oracle, o_simulate};
use crate::stats::{histogram, miller_madow, plugin_entropy};
use crate::streams::{gen_coin, Item};

/// A `{-1, 0, 1}` input with exactly `min(nonzeros, n)` random-sign nonzeros
/// at uniformly chosen positions.
pub fn sparse_signs(n: u64, nonzeros: u64, seed: u64) -> Vec<Item> {
    let mut rng = CounterRng::new(seed, sid::ITEMS, 0);
    let mut a = vec![0; n as usize];
    for j in sample(&mut rng, n as usize, nonzeros.min(n) as usize) {
        a[j] = if rng.bernoulli(0.5) { 1 } else { -1 };
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprAccuracy {
    pub cfg: AprConfig<f64>,
    pub nonzeros: u64,
    pub trials: u64,
    pub p_sample: f64,
    /// `(γ/2)·√n`.
    pub tolerance: f64,
    pub failures: u64,
    pub max_abs_error: f64,
}

/// Fails when `|output - Σa| > (γ/2)√n`. Each trial draws a fresh input and
/// fresh sampling coins.
pub fn apr_accuracy(cfg: &AprConfig<f64>, nonzeros: u64, trials: u64, master: u64) -> AprAccuracy {
    let tolerance = cfg.accuracy();
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|id| {
            let (input_seed, coin_seed) = trial_seeds(master, id);
            let a = sparse_signs(cfg.n, nonzeros, input_seed);
            let mut coins = CounterRng::new(coin_seed, sid::ALG_TAPE, 0);
            let mut s = AprState::unchecked(cfg);
            for &x in &a {
                s.step_with(x, &mut coins);
            }
            (s.output() - a.iter().sum::<i64>() as f64).abs()
        })
        .collect();
    AprAccuracy {
        cfg: *cfg,
        nonzeros,
        trials,
        p_sample: cfg.p_sample(),
        tolerance,
        failures: errors.iter().filter(|&&e| e > tolerance).count() as u64,
        max_abs_error: errors.iter().cloned().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub step: u64,
    pub distinct: usize,
    pub plugin_bits: f64,
    pub miller_madow_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprEntropy {
    pub cfg: AprConfig<f64>,
    pub trials: u64,
    /// `40 + 6·log log n + 2·log(B/(γ√n))`.
    pub bound_bits: f64,
    pub rows: Vec<EntropyRow>,
}

/// Entropy of `(Δ, ζ, Γ)` after each of `steps` updates, over inputs whose
/// entries are `±1` with probability `B/(2n)` each and 0 otherwise.
pub fn apr_entropy(cfg: &AprConfig<f64>, steps: &[u64], trials: u64, master: u64) -> AprEntropy {
    let rate = (cfg.budget / cfg.n as f64).min(1.0);
    let snaps: Vec<Vec<(i64, u64, i64)>> = (0..trials)
        .into_par_iter()
        .map(|id| {
            let (input_seed, coin_seed) = trial_seeds(master, id);
            let mut input = CounterRng::new(input_seed, sid::ITEMS, 0);
            let mut coins = CounterRng::new(coin_seed, sid::ALG_TAPE, 0);
            let mut s = AprState::unchecked(cfg);
            let mut out = Vec::with_capacity(steps.len());
            for j in 1..=cfg.n {
                let a = if input.bernoulli(rate) {
                    if input.bernoulli(0.5) {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
                s.step_with(a, &mut coins);
                if steps.contains(&j) {
                    out.push(s.counters());
                }
            }
            out
        })
        .collect();
    let rows = steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let h = histogram(snaps.iter().filter_map(|v| v.get(i).copied()));
            EntropyRow { step, distinct: h.len(), plugin_bits: plugin_entropy(&h), miller_madow_bits: miller_madow(&h) }
        })
        .collect();
    AprEntropy { cfg: *cfg, trials, bound_bits: cfg.entropy_bound(), rows }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinReport {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub tolerance: f64,
    /// Trials whose recovered sum is within tolerance.
    pub within: u64,
    /// Trials whose recovered sum has the sign of the true sum (ties count
    /// as `+1`).
    pub majority_correct: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Majority through the one-pass simulation of the `k`-pass exact-sum
/// algorithm. Asserts a failure frequency of at most `2/n³` plus three
/// binomial standard errors.
pub fn coin_simulation(n: usize, k: usize, cfg: &AprConfig<f64>, trials: u64, master: u64) -> Result<CoinReport, HarnessError> {
    let alg = ExactSum::new(k, n);
    let oracle =
        build_conditional_oracle::<f64, _>(&alg, n, crate::enumerate::DEFAULT_BUDGET).map_err(|e| HarnessError::Config(e.to_string()))?;
    let tolerance = cfg.accuracy();
    let results: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|id| {
            let (input_seed, sim_seed) = trial_seeds(master, id);
            let y = gen_coin(n as u64, input_seed).items;
            let (_, est) = o_simulate(&oracle, &y, cfg, sim_seed);
            let sum = y.iter().sum::<i64>() as f64;
            ((est - sum).abs() <= tolerance, (est >= 0.0) == (sum >= 0.0))
        })
        .collect();
    let within = results.iter().filter(|r| r.0).count() as u64;
    let majority_correct = results.iter().filter(|r| r.1).count() as u64;
    let q = (2.0 / (n as f64).powi(3)).min(1.0);
    let slack = 3.0 * (q * (1.0 - q) * trials as f64).sqrt();
    let fails = (trials - within) as f64;
    let checks = vec![Check::at_most("failures", fails, q * trials as f64 + slack)];
    let pass = checks.iter().all(|c| c.pass);
    Ok(CoinReport { n, k, trials, tolerance, within, majority_correct, checks, pass })
}
