use serde::{Deserialize, Serialize};

use super::joint::{InfoError, JointTable, Var};
use crate::scalar::{Prob, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicTerm {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicReport {
    pub k: usize,
    pub n: usize,
    pub s: u32,
    pub mic: f64,
    pub mic_cond: f64,
    /// `2ksn`.
    pub bound_2ksn: f64,
    /// `ksn`.
    pub bound_ksn: f64,
    pub terms: Vec<MicTerm>,
    /// Terms of the conditioned measure; `i` is always `k`.
    pub cond_terms: Vec<MicTerm>,
}

impl MicReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// Smallest slack among `mic_cond ≤ mic ≤ 2ksn` and `mic_cond ≤ ksn`.
    pub fn min_slack(&self) -> f64 {
        (self.mic - self.mic_cond).min(self.bound_2ksn - self.mic).min(self.bound_ksn - self.mic_cond)
    }
}

fn join(parts: &[Vec<Var>]) -> Vec<Var> {
    let mut v: Vec<Var> = parts.concat();
    v.sort();
    v.dedup();
    v
}

fn f<P: Real>(x: P) -> f64 {
    x.to_f64().unwrap()
}

/// Every term of the multi-pass information cost: for `ℓ ≤ j`
/// `I(M(i,j); X_ℓ | M(≤i, ℓ-1), M(≤i-1, j))`, and for `ℓ > j`
/// `I(M(i,j); X_ℓ | M(≤i-1, ℓ-1), M(≤i-1, j))`.
fn mic_terms<P: Real>(t: &JointTable<P>) -> Vec<MicTerm> {
    let mut terms = Vec::new();
    for i in 1..=t.k {
        for j in 1..=t.n {
            for l in 1..=t.n {
                let cond = if l <= j {
                    join(&[t.column(i, l - 1), t.column(i - 1, j)])
                } else {
                    join(&[t.column(i - 1, l - 1), t.column(i - 1, j)])
                };
                let bits = f(t.conditional_mi(&[Var::M(i, j)], &[Var::X(l)], &cond));
                terms.push(MicTerm { i, j, l, bits });
            }
        }
    }
    terms
}

/// `I(M(≤k, j); X_ℓ | M_<k, M(≤k, ℓ-1))` for `ℓ ≤ j`.
fn mic_cond_terms<P: Real>(t: &JointTable<P>) -> Vec<MicTerm> {
    let ends = t.ends(t.k - 1);
    let mut terms = Vec::new();
    for j in 1..=t.n {
        for l in 1..=j {
            let cond = join(&[ends.clone(), t.column(t.k, l - 1)]);
            let bits = f(t.conditional_mi(&t.column(t.k, j), &[Var::X(l)], &cond));
            terms.push(MicTerm { i: t.k, j, l, bits });
        }
    }
    terms
}

/// Both measures with their full breakdowns.
pub fn mic<P: Real>(t: &JointTable<P>) -> MicReport {
    let terms = mic_terms(t);
    let cond_terms = mic_cond_terms(t);
    let ksn = (t.k * t.n) as f64 * t.memory_bits as f64;
    MicReport {
        k: t.k,
        n: t.n,
        s: t.memory_bits,
        mic: terms.iter().map(|x| x.bits).sum(),
        mic_cond: cond_terms.iter().map(|x| x.bits).sum(),
        bound_2ksn: 2.0 * ksn,
        bound_ksn: ksn,
        terms,
        cond_terms,
    }
}

/// The conditioned measure alone.
pub fn mic_cond<P: Real>(t: &JointTable<P>) -> f64 {
    mic_cond_terms(t).iter().map(|x| x.bits).sum()
}

/// `Σ_j Σ_{ℓ ≤ j} I(O_j; X_ℓ | O_{ℓ-1})` for a one-pass table.
pub fn one_pass_ic<P: Real>(t: &JointTable<P>) -> Result<f64, InfoError> {
    if t.k != 1 {
        return Err(InfoError::NotOnePass(t.k));
    }
    let mut total = 0.0;
    for j in 1..=t.n {
        for l in 1..=j {
            total += f(t.conditional_mi(&[Var::M(1, j)], &[Var::X(l)], &[Var::M(1, l - 1)]));
        }
    }
    Ok(total)
}

/// `E over M(k,n) of (E[Σ X_j | M(k,n)])²`. Exact for rational masses.
pub fn variance_reduction<P: Prob>(t: &JointTable<P>) -> P {
    use std::collections::HashMap;
    let last = Var::M(t.k, t.n);
    let mut by_state: HashMap<u64, (P, P)> = HashMap::new();
    for a in &t.atoms {
        let sum = P::from_i64(a.inputs.iter().sum()).unwrap();
        let e = by_state.entry(t.value(a, last)).or_insert_with(|| (P::zero(), P::zero()));
        e.0 = e.0.clone() + a.mass.clone();
        e.1 = e.1.clone() + a.mass.clone() * sum;
    }
    by_state.into_values().filter(|(m, _)| *m > P::zero()).fold(P::zero(), |acc, (m, s)| acc + s.clone() * s / m)
}

/// `I(X_j; M(i+1, j-1) | M_0..M_i, M(≤i, j-1))` for every `0 ≤ i < k` and
/// `j`. All vanish for product inputs.
pub fn independence_terms<P: Real>(t: &JointTable<P>) -> Vec<MicTerm> {
    let mut out = Vec::new();
    for i in 0..t.k {
        for j in 1..=t.n {
            let cond = join(&[t.ends(i), t.column(i, j - 1)]);
            let bits = f(t.conditional_mi(&[Var::X(j)], &[Var::M(i + 1, j - 1)], &cond));
            out.push(MicTerm { i, j, l: j, bits });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::DEFAULT_BUDGET;
    use crate::infocost::{build_joint, ProductDist};
    use crate::kpass::zoo::{Constant, ExactSum, Majority, StoreFirst};
    use crate::scalar::{exact_ratio, Exact};

    #[test]
    fn constant_costs_nothing() {
        let t = build_joint(&Constant { k: 2 }, &ProductDist::<f64>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        let r = mic(&t);
        assert!(r.mic.abs() < 1e-12 && r.mic_cond.abs() < 1e-12);
        let t1 = build_joint(&Constant { k: 1 }, &ProductDist::<f64>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        assert!(one_pass_ic(&t1).unwrap().abs() < 1e-12);
        let te = build_joint(&Constant { k: 1 }, &ProductDist::<Exact>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        assert_eq!(variance_reduction(&te), exact_ratio(0, 1));
    }

    #[test]
    fn store_first_three_bits() {
        let t = build_joint(&StoreFirst { k: 1 }, &ProductDist::<f64>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        let r = mic(&t);
        assert!((r.mic - 3.0).abs() < 1e-12);
        for term in &r.terms {
            let expect = if term.l == 1 { 1.0 } else { 0.0 };
            assert!((term.bits - expect).abs() < 1e-12, "{term:?}");
        }
        assert!((one_pass_ic(&t).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_pass_ic_rejects_multipass() {
        let t = build_joint(&StoreFirst { k: 2 }, &ProductDist::<f64>::uniform_bits(2), DEFAULT_BUDGET).unwrap();
        assert_eq!(one_pass_ic(&t), Err(InfoError::NotOnePass(2)));
    }

    #[test]
    fn variance_reduction_closed_forms() {
        for n in 1..=5 {
            let t = build_joint(&ExactSum::new(1, n), &ProductDist::<Exact>::uniform_bits(n), DEFAULT_BUDGET).unwrap();
            assert_eq!(variance_reduction(&t), exact_ratio(n as i64, 1));
        }
        let t = build_joint(&Majority { n: 3 }, &ProductDist::<Exact>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
        assert_eq!(variance_reduction(&t), exact_ratio(9, 4));
    }

    #[test]
    fn report_json_has_breakdown() {
        let t = build_joint(&StoreFirst { k: 2 }, &ProductDist::<f64>::uniform_bits(2), DEFAULT_BUDGET).unwrap();
        let r = mic(&t);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["terms"].as_array().unwrap().len(), 2 * 2 * 2);
        assert_eq!(v["cond_terms"].as_array().unwrap().len(), 3);
    }
}
