//! Exact enumeration of every outcome of a randomized procedure.
//!
//! A procedure written against [`Draw`] is re-run once per path through its
//! tree of random choices. Each run returns its result together with the exact
//! probability of the path, so any finite generator or algorithm can be turned
//! into its exact output distribution.

use std::collections::HashMap;
use std::hash::Hash;

use crate::rng::{CounterRng, Draw};
use crate::scalar::{from_f64, recip, to_f64, Prob};

/// Default cap on the number of enumerated paths.
pub const DEFAULT_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("enumeration exceeded its budget of {limit} outcomes")]
pub struct BudgetExceeded {
    pub limit: usize,
}

/// A [`Draw`] that follows a forced prefix of choices and records the arity of
/// every choice point it meets.
#[derive(Debug)]
pub struct EnumTape<P> {
    choices: Vec<u64>,
    arity: Vec<u64>,
    pos: usize,
    weight: P,
}

impl<P: Prob> EnumTape<P> {
    fn new(prefix: Vec<u64>) -> Self {
        EnumTape { choices: prefix, arity: Vec::new(), pos: 0, weight: P::one() }
    }

    fn branch(&mut self, arity: u64) -> u64 {
        let c = if self.pos < self.choices.len() {
            self.choices[self.pos]
        } else {
            self.choices.push(0);
            0
        };
        self.arity.push(arity);
        self.pos += 1;
        c
    }

    /// Chooses index `i` with probability `weights[i]`. Zero weights are never
    /// visited.
    pub fn weighted(&mut self, weights: &[P]) -> usize {
        let live: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > P::zero()).collect();
        assert!(!live.is_empty(), "no outcome has positive weight");
        if live.len() == 1 {
            let i = live[0];
            self.weight = self.weight.clone() * weights[i].clone();
            return i;
        }
        let c = self.branch(live.len() as u64) as usize;
        let i = live[c];
        self.weight = self.weight.clone() * weights[i].clone();
        i
    }

    pub fn weight(&self) -> &P {
        &self.weight
    }
}

/// A [`Draw`] that can also choose among outcomes with weights in `P`.
pub trait Weighted<P>: Draw {
    /// Index `i` with probability `weights[i]`; the weights must sum to one.
    fn weighted(&mut self, weights: &[P]) -> usize;
}

impl<P: Prob> Weighted<P> for EnumTape<P> {
    fn weighted(&mut self, weights: &[P]) -> usize {
        EnumTape::weighted(self, weights)
    }
}

impl<P: Prob> Weighted<P> for CounterRng {
    fn weighted(&mut self, weights: &[P]) -> usize {
        let u = self.unit();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.iter().enumerate() {
            let w = to_f64(w);
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

impl<P, W: Weighted<P> + ?Sized> Weighted<P> for &mut W {
    fn weighted(&mut self, weights: &[P]) -> usize {
        (**self).weighted(weights)
    }
}

impl<P: Prob> Draw for EnumTape<P> {
    fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        if bound == 1 {
            return 0;
        }
        let c = self.branch(bound);
        self.weight = self.weight.clone() * recip::<P>(bound);
        c
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        let hit = self.branch(2) == 1;
        let q: P = from_f64(p);
        self.weight = self.weight.clone() * if hit { q } else { P::one() - q };
        hit
    }
}

/// Runs `f` once for every path of random choices and returns each result
/// with the probability of its path.
pub fn enumerate<P, T, F>(budget: usize, mut f: F) -> Result<Vec<(T, P)>, BudgetExceeded>
where
    P: Prob,
    F: FnMut(&mut EnumTape<P>) -> T,
{
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    loop {
        let mut tape = EnumTape::new(prefix);
        let value = f(&mut tape);
        if out.len() >= budget {
            return Err(BudgetExceeded { limit: budget });
        }
        out.push((value, tape.weight));
        let mut choices = tape.choices;
        choices.truncate(tape.pos);
        let arity = tape.arity;
        let next = (0..choices.len()).rev().find(|&i| choices[i] + 1 < arity[i]);
        match next {
            Some(i) => {
                choices.truncate(i + 1);
                choices[i] += 1;
                prefix = choices;
            }
            None => return Ok(out),
        }
    }
}

/// Like [`enumerate`] but merges equal outcomes.
pub fn distribution<P, T, F>(budget: usize, f: F) -> Result<HashMap<T, P>, BudgetExceeded>
where
    P: Prob,
    T: Eq + Hash,
    F: FnMut(&mut EnumTape<P>) -> T,
{
    let mut map: HashMap<T, P> = HashMap::new();
    for (v, w) in enumerate(budget, f)? {
        let e = map.entry(v).or_insert_with(P::zero);
        *e = e.clone() + w;
    }
    Ok(map)
}

/// Total variation distance between two finite distributions.
pub fn total_variation<P: Prob, T: Eq + Hash + Clone>(a: &HashMap<T, P>, b: &HashMap<T, P>) -> P {
    let mut sum = P::zero();
    for (k, pa) in a {
        let pb = b.get(k).cloned().unwrap_or_else(P::zero);
        sum = sum + crate::scalar::abs_diff(pa, &pb);
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum = sum + pb.clone();
        }
    }
    sum / (P::one() + P::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{exact_ratio, Exact};

    #[test]
    fn dice_pair_sums() {
        let d = distribution::<Exact, _, _>(DEFAULT_BUDGET, |t| t.below(6) + t.below(6)).unwrap();
        assert_eq!(d.len(), 11);
        assert_eq!(d[&5], exact_ratio(6, 36));
        let total = d.values().fold(Exact::from_integer(0.into()), |a, b| a + b);
        assert_eq!(total, exact_ratio(1, 1));
    }

    #[test]
    fn variable_depth_paths() {
        // flip once; on heads flip again
        let d = distribution::<Exact, _, _>(DEFAULT_BUDGET, |t| if t.bernoulli(0.5) { 1 + t.bernoulli(0.25) as u32 } else { 0 }).unwrap();
        assert_eq!(d[&0], exact_ratio(1, 2));
        assert_eq!(d[&1], exact_ratio(3, 8));
        assert_eq!(d[&2], exact_ratio(1, 8));
    }

    #[test]
    fn degenerate_bernoulli_does_not_branch() {
        let v = enumerate::<f64, _, _>(10, |t| (t.bernoulli(0.0), t.bernoulli(1.0))).unwrap();
        assert_eq!(v, vec![((false, true), 1.0)]);
    }

    #[test]
    fn budget_is_enforced() {
        let r = enumerate::<f64, _, _>(10, |t| t.below(100));
        assert_eq!(r.unwrap_err(), BudgetExceeded { limit: 10 });
    }

    #[test]
    fn weighted_skips_zero_mass() {
        let w = [0.0, 0.5, 0.5];
        let v = enumerate::<f64, _, _>(10, |t| t.weighted(&w)).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|(i, _)| *i != 0));
    }

    #[test]
    fn tv_of_disjoint_supports_is_one() {
        let a: HashMap<u8, f64> = [(0, 1.0)].into();
        let b: HashMap<u8, f64> = [(1, 1.0)].into();
        assert_eq!(total_variation(&a, &b), 1.0);
    }
}
