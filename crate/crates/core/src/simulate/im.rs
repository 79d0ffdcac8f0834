use std::collections::HashMap;

use super::oracle::{ConditionalOracle, StepKey};
use crate::apr::{AprConfig, AprState};
use crate::enumerate::{distribution, BudgetExceeded, Weighted};
use crate::infocost::{Atom, JointTable, Var};
use crate::kpass::state_width;
use crate::rng::{streams as sid, CounterRng};
use crate::scalar::Prob;
use crate::streams::Item;

#[derive(Debug, Clone, PartialEq)]
pub struct SimStep<P> {
    pub y: Item,
    pub beta: P,
    pub x: Item,
    /// Sampled `m'(≤k, j)`.
    pub column: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTranscript<P> {
    /// Sampled `m'_0, .., m'_{k-1}`.
    pub ends: Vec<u64>,
    pub steps: Vec<SimStep<P>>,
    /// One approximate counter per instance label when run as the majority
    /// simulation.
    pub apr: Vec<AprState<f64>>,
}

impl<P> SimTranscript<P> {
    pub fn modifications(&self) -> usize {
        self.steps.iter().filter(|s| s.x != s.y).count()
    }

    pub fn x_prime(&self) -> Vec<Item> {
        self.steps.iter().map(|s| s.x).collect()
    }

    pub fn y(&self) -> Vec<Item> {
        self.steps.iter().map(|s| s.y).collect()
    }

    /// Columns `0..=n`; column 0 is the sampled end-state vector.
    pub fn columns(&self) -> Vec<Vec<u64>> {
        std::iter::once(self.ends.clone()).chain(self.steps.iter().map(|s| s.column.clone())).collect()
    }

    /// Simulated `m'(k, n)`.
    pub fn final_state(&self) -> u64 {
        *self.columns().last().unwrap().last().unwrap()
    }
}

/// The imitation procedure with all randomness taken from `w`. When `y` is
/// `None` the input bits are drawn from `w` as well.
pub fn im_run<P: Prob, W: Weighted<P>>(oracle: &ConditionalOracle<P>, y: Option<&[Item]>, w: &mut W) -> SimTranscript<P> {
    let two = P::one() + P::one();
    let end_weights: Vec<P> = oracle.ends.iter().map(|(_, p)| p.clone()).collect();
    let ends = oracle.ends[w.weighted(&end_weights)].0.clone();
    let mut prev = ends.clone();
    let mut steps = Vec::with_capacity(oracle.n);
    for j in 1..=oracle.n {
        let yj = match y {
            Some(y) => y[j - 1],
            None => {
                if w.below(2) == 1 {
                    1
                } else {
                    -1
                }
            }
        };
        let key = StepKey { j, ends: ends.clone(), prev };
        let beta = oracle.beta(&key).clone();
        let flip = two.clone() * beta.clone();
        let x = if beta > P::zero() {
            // -1 is raised to 1 with probability 2β
            if yj < 0 && w.weighted(&[P::one() - flip.clone(), flip]) == 1 {
                1
            } else {
                yj
            }
        } else if yj > 0 && w.weighted(&[P::one() + flip.clone(), P::zero() - flip]) == 1 {
            -1
        } else {
            yj
        };
        let rows = &oracle.posterior[&(key.clone(), x)];
        let weights: Vec<P> = rows.iter().map(|(_, p)| p.clone()).collect();
        let column = rows[w.weighted(&weights)].0.clone();
        prev = column.clone();
        steps.push(SimStep { y: yj, beta, x, column });
    }
    SimTranscript { ends, steps, apr: Vec::new() }
}

/// Runs the imitation on the given bits with randomness keyed by `seed`.
pub fn im_simulate<P: Prob>(oracle: &ConditionalOracle<P>, y: &[Item], seed: u64) -> SimTranscript<P> {
    assert_eq!(y.len(), oracle.n, "input length");
    im_run(oracle, Some(y), &mut CounterRng::new(seed, sid::SIM, 0))
}

/// Imitation plus one approximate counter per instance label, fed
/// `a_j = (y_j - x'_j)/2`. Returns the transcript and, per label, the
/// estimated correction `Σ (y_j - x'_j)` over that instance.
pub fn o_simulate_instances<P: Prob>(
    oracle: &ConditionalOracle<P>,
    y: &[Item],
    labels: &[u32],
    apr_cfg: &AprConfig<f64>,
    seed: u64,
) -> (SimTranscript<P>, Vec<f64>) {
    assert_eq!(labels.len(), y.len(), "one label per update");
    let mut tr = im_simulate(oracle, y, seed);
    let t = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut aprs = vec![AprState::unchecked(apr_cfg); t];
    let mut d = CounterRng::new(seed, sid::SIM, 1);
    for (step, &s) in tr.steps.iter().zip(labels) {
        aprs[s as usize - 1].step_with((step.y - step.x) / 2, &mut d);
    }
    let corrections = aprs.iter().map(|a| 2.0 * a.output()).collect();
    tr.apr = aprs;
    (tr, corrections)
}

/// Imitation with a single approximate counter. The estimate of `Σ y_j` is
/// the algorithm's output on the simulated final state plus the counter's
/// correction.
pub fn o_simulate<P: Prob>(oracle: &ConditionalOracle<P>, y: &[Item], apr_cfg: &AprConfig<f64>, seed: u64) -> (SimTranscript<P>, f64) {
    let labels = vec![1; y.len()];
    let (tr, corr) = o_simulate_instances(oracle, y, &labels, apr_cfg, seed);
    let base = oracle.outputs[&tr.final_state()] as f64;
    (tr, base + corr[0])
}

/// An outcome of the imitation: input bits, modified bits, state columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimOutcome {
    pub y: Vec<Item>,
    pub x: Vec<Item>,
    pub columns: Vec<Vec<u64>>,
}

/// Exact law of the imitation over uniform input bits.
pub fn im_law<P: Prob>(oracle: &ConditionalOracle<P>, budget: usize) -> Result<HashMap<SimOutcome, P>, BudgetExceeded> {
    distribution(budget, |tape| {
        let tr = im_run(oracle, None, tape);
        SimOutcome { y: tr.y(), x: tr.x_prime(), columns: tr.columns() }
    })
}

/// Law of `(X, M(≤k, [0, n]))` for the native algorithm.
pub fn native_law<P: Prob>(oracle: &ConditionalOracle<P>) -> HashMap<(Vec<Item>, Vec<Vec<u64>>), P> {
    let t = &oracle.table;
    let mut map: HashMap<(Vec<Item>, Vec<Vec<u64>>), P> = HashMap::new();
    for a in &t.atoms {
        let cols = (0..=t.n).map(|j| (1..=t.k).map(|i| t.value(a, Var::M(i, j))).collect()).collect();
        let e = map.entry((a.inputs.clone(), cols)).or_insert_with(P::zero);
        *e = e.clone() + a.mass.clone();
    }
    map
}

/// Law of `(X', M'(≤k, [0, n]))` under the imitation.
pub fn simulated_law<P: Prob>(law: &HashMap<SimOutcome, P>) -> HashMap<(Vec<Item>, Vec<Vec<u64>>), P> {
    let mut map: HashMap<(Vec<Item>, Vec<Vec<u64>>), P> = HashMap::new();
    for (o, p) in law {
        let e = map.entry((o.x.clone(), o.columns.clone())).or_insert_with(P::zero);
        *e = e.clone() + p.clone();
    }
    map
}

/// `E[#{j : y_j ≠ x'_j}]`.
pub fn expected_modifications<P: Prob>(law: &HashMap<SimOutcome, P>) -> P {
    law.iter().fold(P::zero(), |acc, (o, p)| {
        let m = o.y.iter().zip(&o.x).filter(|(a, b)| a != b).count();
        acc + p.clone() * P::from_usize(m).unwrap()
    })
}

/// The imitation as a one-pass algorithm over `y`, with state
/// `(m'(≤k, j), m'_<k)` interned to integer codes.
pub fn im_joint_table<P: Prob>(law: &HashMap<SimOutcome, P>) -> JointTable<P> {
    let mut codes: HashMap<Vec<u64>, u64> = HashMap::new();
    let mut outcomes: Vec<(&SimOutcome, &P)> = law.iter().collect();
    outcomes.sort_by(|a, b| (&a.0.y, &a.0.columns).cmp(&(&b.0.y, &b.0.columns)));
    let mut atoms: Vec<Atom<P>> = Vec::with_capacity(outcomes.len());
    for (o, p) in outcomes {
        let ends = &o.columns[0];
        let grid = o
            .columns
            .iter()
            .map(|c| {
                let key: Vec<u64> = c.iter().chain(ends).copied().collect();
                let next = codes.len() as u64;
                *codes.entry(key).or_insert(next)
            })
            .collect();
        atoms.push(Atom { inputs: o.y.clone(), tape: Vec::new(), grid, mass: p.clone() });
    }
    let n = law.keys().next().map_or(0, |o| o.y.len());
    let bits = state_width(codes.len().saturating_sub(1) as u64).max(1);
    JointTable { n, k: 1, memory_bits: bits, atoms }
}
