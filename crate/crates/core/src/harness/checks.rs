//! Exact checks behind `infocost-check` and `simulate-check`.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use super::{Check, HarnessError};
use crate::enumerate::{distribution, total_variation, DEFAULT_BUDGET};
use crate::infocost::{build_joint, mic, ProductDist};
use crate::kpass::zoo::{grid_zoo, ParityCompare, StoreThenCount, ToyCollision};
use crate::kpass::{run_k_pass, Frozen, KPassAlgorithm, Sequential};
use crate::rng::Draw;
use crate::scalar::{abs_diff, exact_ratio, to_f64, Exact};
use crate::simulate::{build_conditional_oracle, expected_modifications, im_law, mostlyeq_protocol, native_law, simulated_law};
use crate::streams::{sample_local_needle, sample_mostlyeq, sample_needle, sample_uniform, Item, MostlyEqDist, NeedleParams};

fn err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Config(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicGridRow {
    pub alg: String,
    pub n: usize,
    pub k: usize,
    pub dist: String,
    pub mic: f64,
    pub mic_cond: f64,
    pub bound_2ksn: f64,
    pub min_slack: f64,
}

/// `MIC_cond ≤ MIC ≤ 2ksn` for every toy in the grid zoo, every `n` and `k`
/// given, under uniform bits and bits with `P(+1) = 3/4`.
pub fn mic_grid(ns: &[usize], ks: &[usize]) -> Result<Vec<MicGridRow>, HarnessError> {
    let mut rows = Vec::new();
    for &k in ks {
        for alg in grid_zoo(k) {
            for &n in ns {
                for (dist, mu) in [("uniform", ProductDist::<f64>::uniform_bits(n)), ("biased", ProductDist::bits(n, 0.75))] {
                    let table = build_joint(alg.as_ref(), &mu, DEFAULT_BUDGET).map_err(err)?;
                    let r = mic(&table);
                    rows.push(MicGridRow {
                        alg: alg.name(),
                        n,
                        k,
                        dist: dist.into(),
                        mic: r.mic,
                        mic_cond: r.mic_cond,
                        bound_2ksn: r.bound_2ksn,
                        min_slack: r.min_slack(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationCheck {
    pub alg: String,
    pub n: usize,
    /// TV between the simulated and native laws of `(X, M(·, ·))`.
    pub tv: f64,
    /// `E[Σ 1{Y_j ≠ X'_j}]`.
    pub modifications: f64,
    /// `√(n·H(M_{<k}))`.
    pub modification_bound: f64,
}

/// Exact imitation of the two-pass parity toy on `n` uniform bits.
pub fn simulation_check(n: usize) -> Result<SimulationCheck, HarnessError> {
    let o = build_conditional_oracle::<Exact, _>(&ParityCompare, n, DEFAULT_BUDGET).map_err(err)?;
    let law = im_law(&o, DEFAULT_BUDGET).map_err(err)?;
    let tv = total_variation(&native_law(&o), &simulated_law(&law));
    Ok(SimulationCheck {
        alg: ParityCompare.name(),
        n,
        tv: to_f64(&tv),
        modifications: to_f64(&expected_modifications(&law)),
        modification_bound: (n as f64 * o.end_entropy()).sqrt(),
    })
}

/// Lets the protocol's gap fills and the algorithm's coins share one
/// enumeration tape.
struct Shared<'a, D>(&'a RefCell<D>);

impl<D: Draw> Draw for Shared<'_, D> {
    fn below(&mut self, bound: u64) -> u64 {
        self.0.borrow_mut().below(bound)
    }
    fn bernoulli(&mut self, p: f64) -> bool {
        self.0.borrow_mut().bernoulli(p)
    }
}

type OutLaw = HashMap<i64, Exact>;

/// Output law of an enumerated run; `None` marks a run that failed.
fn outputs<E: std::fmt::Display>(law: Result<HashMap<Option<i64>, Exact>, E>) -> Result<OutLaw, HarnessError> {
    law.map_err(err)?.into_iter().map(|(k, v)| k.map(|o| (o, v)).ok_or_else(|| err("run failed during enumeration"))).collect()
}

fn err_rate(on_zero: &OutLaw, on_one: &OutLaw) -> Exact {
    let z = exact_ratio(0, 1);
    on_zero.get(&1).cloned().unwrap_or_else(|| z.clone()) + on_one.get(&0).cloned().unwrap_or(z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MostlyEqRow {
    pub alg: String,
    pub positions: Vec<usize>,
    pub protocol_err: f64,
    pub alg_err: f64,
    /// Exact `|Err_Π - Err_alg|`.
    pub diff: f64,
}

/// `Err_Π(P_U, P_Eq)` against `Err_alg(D0, D^S)` for frozen toy detectors at
/// every nonempty `S ⊆ [n]`.
pub fn mostlyeq_check(n: usize, t: u64) -> Result<Vec<MostlyEqRow>, HarnessError> {
    let params = NeedleParams::new(t, n as u64, 0.0).map_err(err)?;
    let algs: Vec<Box<dyn KPassAlgorithm>> = vec![Box::new(Frozen(ToyCollision { t })), Box::new(Frozen(StoreThenCount { t }))];
    let mut rows = Vec::new();
    for alg in &algs {
        let d0 = outputs(distribution(DEFAULT_BUDGET, |tape| {
            let items = sample_uniform(params, tape);
            run_k_pass(alg.as_ref(), &items, false, &mut Sequential(tape)).ok().map(|r| r.output)
        }))?;
        for mask in 1u32..1 << n {
            let s: Vec<usize> = (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect();
            let protocol = |which| {
                outputs(distribution(DEFAULT_BUDGET, |tape| {
                    let z = sample_mostlyeq(s.len(), t, which, tape).z;
                    let shared = RefCell::new(tape);
                    mostlyeq_protocol(alg.as_ref(), n, t, &s, &z, &mut Sequential(Shared(&shared)), &mut Shared(&shared))
                        .ok()
                        .map(|r| r.output)
                }))
            };
            let pu = protocol(MostlyEqDist::Uniform)?;
            let peq = protocol(MostlyEqDist::MostlyEqual)?;
            let ds = outputs(distribution(DEFAULT_BUDGET, |tape| {
                let items = sample_local_needle(params, &s, tape).0;
                run_k_pass(alg.as_ref(), &items, false, &mut Sequential(tape)).ok().map(|r| r.output)
            }))?;
            let (a, b) = (err_rate(&pu, &peq), err_rate(&d0, &ds));
            rows.push(MostlyEqRow {
                alg: alg.name(),
                positions: s,
                protocol_err: to_f64(&a),
                alg_err: to_f64(&b),
                diff: to_f64(&abs_diff(&a, &b)),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub t: u64,
    pub n: usize,
    pub p: f64,
    pub outcomes: usize,
    /// Largest per-outcome `|D1(x) - Σ_S a_S D^S(x)|`.
    pub max_abs_error: f64,
}

/// `D1 = Σ_S a_S D^S` with `a_S = (2p)^{|S|}(1 - 2p)^{n - |S|}`, computed over
/// exact rationals. Needs `p ≤ 1/2`.
pub fn decomposition_check(t: u64, n: usize, p: f64) -> Result<Decomposition, HarnessError> {
    if !(0.0..=0.5).contains(&p) {
        return Err(HarnessError::Config(format!("decomposition needs 0 ≤ p ≤ 1/2, got {p}")));
    }
    let params = NeedleParams::new(t, n as u64, p).map_err(err)?;
    let d1: HashMap<Vec<Item>, Exact> = distribution(DEFAULT_BUDGET, |tape| sample_needle(params, tape).0).map_err(err)?;
    let two_p = Exact::from_float(2.0 * p).ok_or_else(|| err("p is not finite"))?;
    let one = exact_ratio(1, 1);
    let mut mix: HashMap<Vec<Item>, Exact> = HashMap::new();
    for mask in 0u32..1 << n {
        let s: Vec<usize> = (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect();
        let mut a = one.clone();
        for j in 1..=n {
            a *= if s.contains(&j) { two_p.clone() } else { one.clone() - two_p.clone() };
        }
        let ds: HashMap<Vec<Item>, Exact> = distribution(DEFAULT_BUDGET, |tape| sample_local_needle(params, &s, tape).0).map_err(err)?;
        for (x, w) in ds {
            let e = mix.entry(x).or_insert_with(|| exact_ratio(0, 1));
            *e = e.clone() + a.clone() * w;
        }
    }
    let keys: std::collections::HashSet<&Vec<Item>> = d1.keys().chain(mix.keys()).collect();
    let zero = exact_ratio(0, 1);
    let max_abs_error =
        keys.iter().map(|x| to_f64(&abs_diff(d1.get(*x).unwrap_or(&zero), mix.get(*x).unwrap_or(&zero)))).fold(0.0, f64::max);
    Ok(Decomposition { t, n, p, outcomes: keys.len(), max_abs_error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoCostReport {
    pub rows: Vec<MicGridRow>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// The full inequality grid: `n = 2..=5`, `k ∈ {1, 2}`.
pub fn infocost_report() -> Result<InfoCostReport, HarnessError> {
    let rows = mic_grid(&[2, 3, 4, 5], &[1, 2])?;
    let worst = rows.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    let checks = vec![Check::at_least("min_slack", worst, -1e-9)];
    let pass = checks.iter().all(|c| c.pass);
    Ok(InfoCostReport { rows, checks, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub simulation: SimulationCheck,
    pub mostlyeq: Vec<MostlyEqRow>,
    pub decomposition: Decomposition,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Imitation fidelity at `n = 3`, the protocol reduction at `n = 3, t = 2`
/// and the decomposition at `t = 2, n = 2, p = 1/4`.
pub fn simulate_report() -> Result<SimulateReport, HarnessError> {
    let simulation = simulation_check(3)?;
    let mostlyeq = mostlyeq_check(3, 2)?;
    let decomposition = decomposition_check(2, 2, 0.25)?;
    let worst_diff = mostlyeq.iter().map(|r| r.diff).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("simulation_tv", simulation.tv, 1e-9),
        Check::at_most("modifications", simulation.modifications, simulation.modification_bound),
        Check::at_most("mostlyeq_err_diff", worst_diff, 1e-9),
        Check::at_most("decomposition_error", decomposition.max_abs_error, 1e-12),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(SimulateReport { simulation, mostlyeq, decomposition, checks, pass })
}
