use std::collections::HashMap;

use crate::enumerate::{enumerate, BudgetExceeded};
use crate::kpass::{run_k_pass, KPassAlgorithm, KPassError, Sequential};
use crate::scalar::{half, Prob, Real};
use crate::streams::Item;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InfoError {
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error(transparent)]
    KPass(#[from] KPassError),
    #[error("measure is defined for one-pass algorithms, table has {0} passes")]
    NotOnePass(usize),
}

/// Independent, not necessarily identical, coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDist<P> {
    pub marginals: Vec<Vec<(Item, P)>>,
}

impl<P: Prob> ProductDist<P> {
    pub fn iid(n: usize, support: Vec<(Item, P)>) -> Self {
        ProductDist { marginals: vec![support; n] }
    }

    pub fn uniform_bits(n: usize) -> Self {
        Self::iid(n, vec![(-1, half()), (1, half())])
    }

    /// `+1` with probability `plus`.
    pub fn bits(n: usize, plus: P) -> Self {
        Self::iid(n, vec![(-1, P::one() - plus.clone()), (1, plus)])
    }

    pub fn uniform_symbols(n: usize, t: u64) -> Self {
        let w = P::one() / P::from_u64(t).unwrap();
        Self::iid(n, (1..=t as Item).map(|x| (x, w.clone())).collect())
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }
}

/// A random variable of the joint law. Indices are 1-based; `M(i, 0)` is the
/// state entering pass `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    M(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<P> {
    pub inputs: Vec<Item>,
    pub tape: Vec<u32>,
    /// Row-major `k × (n + 1)` state grid.
    pub grid: Vec<u64>,
    pub mass: P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTable<P> {
    pub n: usize,
    pub k: usize,
    pub memory_bits: u32,
    pub atoms: Vec<Atom<P>>,
}

impl<P: Prob> JointTable<P> {
    pub fn value(&self, atom: &Atom<P>, var: Var) -> u64 {
        match var {
            Var::X(l) => atom.inputs[l - 1] as u64,
            Var::M(i, j) => atom.grid[(i - 1) * (self.n + 1) + j],
        }
    }

    /// `M_i`, the state at the end of pass `i`; `M_0` is the initial state.
    pub fn end(&self, i: usize) -> Var {
        if i == 0 {
            Var::M(1, 0)
        } else {
            Var::M(i, self.n)
        }
    }

    /// `M_0, .., M_{upto}`.
    pub fn ends(&self, upto: usize) -> Vec<Var> {
        (0..=upto).map(|i| self.end(i)).collect()
    }

    /// `M(1, j), .., M(i, j)`; empty for `i = 0`.
    pub fn column(&self, i: usize, j: usize) -> Vec<Var> {
        (1..=i).map(|r| Var::M(r, j)).collect()
    }

    pub fn total_mass(&self) -> P {
        self.atoms.iter().fold(P::zero(), |a, at| a + at.mass.clone())
    }

    pub fn marginal(&self, vars: &[Var]) -> HashMap<Vec<u64>, P> {
        let mut map: HashMap<Vec<u64>, P> = HashMap::new();
        for atom in &self.atoms {
            let key: Vec<u64> = vars.iter().map(|&v| self.value(atom, v)).collect();
            let e = map.entry(key).or_insert_with(P::zero);
            *e = e.clone() + atom.mass.clone();
        }
        map
    }

    pub fn map_mass<Q: Prob>(&self, f: impl Fn(&P) -> Q) -> JointTable<Q> {
        JointTable {
            n: self.n,
            k: self.k,
            memory_bits: self.memory_bits,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { inputs: a.inputs.clone(), tape: a.tape.clone(), grid: a.grid.clone(), mass: f(&a.mass) })
                .collect(),
        }
    }

    pub fn to_f64(&self) -> JointTable<f64> {
        self.map_mass(|m| m.to_f64().unwrap())
    }
}

impl<P: Real> JointTable<P> {
    /// Shannon entropy in bits; `0·log 0 = 0`.
    pub fn entropy(&self, vars: &[Var]) -> P {
        self.marginal(vars).values().filter(|p| **p > P::zero()).fold(P::zero(), |h, p| h - *p * p.log2())
    }

    /// `I(A; B | C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)`.
    pub fn conditional_mi(&self, a: &[Var], b: &[Var], c: &[Var]) -> P {
        let cat = |xs: &[&[Var]]| -> Vec<Var> { xs.iter().flat_map(|x| x.iter().copied()).collect() };
        self.entropy(&cat(&[a, c])) + self.entropy(&cat(&[b, c])) - self.entropy(&cat(&[a, b, c])) - self.entropy(c)
    }
}

/// Exact law of `(X, R, M)` for `alg` on inputs drawn from `mu`.
pub fn build_joint<P, A>(alg: &A, mu: &ProductDist<P>, budget: usize) -> Result<JointTable<P>, InfoError>
where
    P: Prob,
    A: KPassAlgorithm + ?Sized,
{
    let n = mu.len();
    let weights: Vec<Vec<P>> = mu.marginals.iter().map(|m| m.iter().map(|(_, w)| w.clone()).collect()).collect();
    let paths = enumerate::<P, _, _>(budget, |tape| {
        let inputs: Vec<Item> = (0..n).map(|j| mu.marginals[j][tape.weighted(&weights[j])].0).collect();
        let tr = run_k_pass(alg, &inputs, true, &mut Sequential(&mut *tape));
        (inputs, tr)
    })?;
    let mut atoms = Vec::with_capacity(paths.len());
    for ((inputs, tr), mass) in paths {
        let tr = tr?;
        atoms.push(Atom { inputs, tape: tr.tape, grid: tr.grid.expect("recorded"), mass });
    }
    Ok(JointTable { n, k: alg.passes(), memory_bits: alg.memory_bits(), atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::DEFAULT_BUDGET;
    use crate::kpass::zoo::{Constant, NoisyStore, StoreFirst};
    use crate::scalar::{exact_ratio, Exact};

    #[test]
    fn constant_is_product_with_point_mass() {
        let t = build_joint(&Constant { k: 1 }, &ProductDist::<Exact>::uniform_bits(2), DEFAULT_BUDGET).unwrap();
        assert_eq!(t.atoms.len(), 4);
        assert!(t.atoms.iter().all(|a| a.mass == exact_ratio(1, 4) && a.grid.iter().all(|&s| s == 0)));
        assert_eq!(t.total_mass(), exact_ratio(1, 1));
    }

    #[test]
    fn store_first_copies_x1() {
        let t = build_joint(&StoreFirst { k: 1 }, &ProductDist::<f64>::bits(3, 0.25), DEFAULT_BUDGET).unwrap();
        for a in &t.atoms {
            for j in 1..=3 {
                assert_eq!(t.value(a, Var::M(1, j)), 1 + (a.inputs[0] > 0) as u64);
            }
        }
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tape_is_part_of_the_law() {
        let t = build_joint(&NoisyStore { k: 1 }, &ProductDist::<Exact>::uniform_bits(2), DEFAULT_BUDGET).unwrap();
        assert_eq!(t.atoms.len(), 8);
        assert_eq!(t.total_mass(), exact_ratio(1, 1));
    }

    #[test]
    fn mi_basics() {
        let t = build_joint(&StoreFirst { k: 1 }, &ProductDist::<f64>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        assert!(t.conditional_mi(&[Var::X(1)], &[Var::X(2)], &[]).abs() < 1e-12);
        assert!((t.conditional_mi(&[Var::X(1)], &[Var::X(1)], &[]) - 1.0).abs() < 1e-12);
        assert!((t.conditional_mi(&[Var::M(1, 3)], &[Var::X(1)], &[]) - 1.0).abs() < 1e-12);
        assert!(t.conditional_mi(&[Var::M(1, 3)], &[Var::X(1)], &[Var::M(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn budget_guard() {
        let r = build_joint(&Constant { k: 1 }, &ProductDist::<f64>::uniform_bits(12), 1000);
        assert!(matches!(r, Err(InfoError::Budget(_))));
    }
}
