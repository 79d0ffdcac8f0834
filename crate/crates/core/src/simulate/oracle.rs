use std::collections::{BTreeMap, HashMap};
use std::fmt::{Display, Write as _};

use crate::infocost::{build_joint, InfoError, JointTable, ProductDist, Var};
use crate::kpass::KPassAlgorithm;
use crate::scalar::{half, Prob};

/// Conditioning key of step `j`: the end states `M_<k` and the column
/// `M(≤k, j-1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepKey {
    pub j: usize,
    pub ends: Vec<u64>,
    pub prev: Vec<u64>,
}

/// Exact conditionals of an enumerable k-pass algorithm on uniform `±1`
/// inputs.
#[derive(Debug, Clone)]
pub struct ConditionalOracle<P> {
    pub n: usize,
    pub k: usize,
    /// Law of `(M_0, .., M_{k-1})`.
    pub ends: Vec<(Vec<u64>, P)>,
    /// `Pr[X_j = 1 | key] - 1/2`.
    pub beta: HashMap<StepKey, P>,
    /// Law of `M(≤k, j)` given the key and `X_j`.
    pub posterior: HashMap<(StepKey, i64), Vec<(Vec<u64>, P)>>,
    /// Law of `M(≤k, j)` given the key alone.
    pub forward: HashMap<StepKey, Vec<(Vec<u64>, P)>>,
    /// Output of the algorithm on each reachable final state.
    pub outputs: HashMap<u64, i64>,
    /// The joint law the tables were derived from.
    pub table: JointTable<P>,
}

fn normalize<P: Prob>(m: BTreeMap<Vec<u64>, P>) -> Vec<(Vec<u64>, P)> {
    let total = m.values().fold(P::zero(), |a, b| a + b.clone());
    m.into_iter().map(|(k, v)| (k, v / total.clone())).collect()
}

fn add<P: Prob>(e: &mut P, w: &P) {
    *e = e.clone() + w.clone();
}

impl<P: Prob> ConditionalOracle<P> {
    pub fn from_table<A: KPassAlgorithm + ?Sized>(alg: &A, table: JointTable<P>) -> Self {
        let (n, k) = (table.n, table.k);
        let end_vars = table.ends(k - 1);
        let mut ends: BTreeMap<Vec<u64>, P> = BTreeMap::new();
        let mut key_mass: HashMap<StepKey, P> = HashMap::new();
        let mut ones: HashMap<StepKey, P> = HashMap::new();
        let mut post: HashMap<(StepKey, i64), BTreeMap<Vec<u64>, P>> = HashMap::new();
        let mut fwd: HashMap<StepKey, BTreeMap<Vec<u64>, P>> = HashMap::new();
        let mut outputs = HashMap::new();
        for atom in &table.atoms {
            let e: Vec<u64> = end_vars.iter().map(|&v| table.value(atom, v)).collect();
            add(ends.entry(e.clone()).or_insert_with(P::zero), &atom.mass);
            let col = |j: usize| -> Vec<u64> { (1..=k).map(|i| table.value(atom, Var::M(i, j))).collect() };
            for j in 1..=n {
                let key = StepKey { j, ends: e.clone(), prev: col(j - 1) };
                let x = atom.inputs[j - 1];
                add(key_mass.entry(key.clone()).or_insert_with(P::zero), &atom.mass);
                let o = ones.entry(key.clone()).or_insert_with(P::zero);
                if x > 0 {
                    add(o, &atom.mass);
                }
                add(post.entry((key.clone(), x)).or_default().entry(col(j)).or_insert_with(P::zero), &atom.mass);
                add(fwd.entry(key).or_default().entry(col(j)).or_insert_with(P::zero), &atom.mass);
            }
            let last = table.value(atom, Var::M(k, n));
            outputs.insert(last, alg.output(last));
        }
        let beta = key_mass.iter().map(|(key, m)| (key.clone(), ones[key].clone() / m.clone() - half::<P>())).collect();
        ConditionalOracle {
            n,
            k,
            ends: normalize(ends),
            beta,
            posterior: post.into_iter().map(|(key, m)| (key, normalize(m))).collect(),
            forward: fwd.into_iter().map(|(key, m)| (key, normalize(m))).collect(),
            outputs,
            table,
        }
    }

    /// `β_j` for a reachable key.
    pub fn beta(&self, key: &StepKey) -> &P {
        &self.beta[key]
    }

    pub fn end_entropy(&self) -> f64 {
        self.ends.iter().map(|(_, p)| p.to_f64().unwrap()).filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
    }

    /// Tables as sorted text lines, one fact per line.
    pub fn dump(&self) -> String
    where
        P: Display,
    {
        let fmt = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "oracle n={} k={}", self.n, self.k);
        for (e, p) in &self.ends {
            let _ = writeln!(s, "end {} {}", fmt(e), p);
        }
        let mut keys: Vec<&StepKey> = self.beta.keys().collect();
        keys.sort();
        for key in keys {
            let _ = writeln!(s, "beta {} {} {} {}", key.j, fmt(&key.ends), fmt(&key.prev), self.beta[key]);
            for x in [-1i64, 1] {
                if let Some(rows) = self.posterior.get(&(key.clone(), x)) {
                    for (col, p) in rows {
                        let _ = writeln!(s, "post {} {} {} {} {} {}", key.j, fmt(&key.ends), fmt(&key.prev), x, fmt(col), p);
                    }
                }
            }
        }
        s
    }
}

/// Builds the exact joint of `alg` on `n` uniform bits and derives its
/// conditionals. Fails if more than `budget` outcomes would be enumerated.
pub fn build_conditional_oracle<P, A>(alg: &A, n: usize, budget: usize) -> Result<ConditionalOracle<P>, InfoError>
where
    P: Prob,
    A: KPassAlgorithm + ?Sized,
{
    let table = build_joint(alg, &ProductDist::<P>::uniform_bits(n), budget)?;
    Ok(ConditionalOracle::from_table(alg, table))
}
