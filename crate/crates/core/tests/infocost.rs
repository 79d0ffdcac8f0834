use std::collections::HashMap;

use needlestream::enumerate::DEFAULT_BUDGET;
use needlestream::harness::checks::mic_grid;
use needlestream::infocost::{build_joint, independence_terms, mic, mic_cond, JointTable, ProductDist, Var};
use needlestream::kpass::zoo::{grid_zoo, NoisyStore, ParityCompare, SumMod, Threshold};
use needlestream::kpass::KPassAlgorithm;

fn value(t: &JointTable<f64>, a: &needlestream::infocost::Atom<f64>, v: Var) -> u64 {
    match v {
        Var::X(j) => a.inputs[j - 1] as u64,
        Var::M(i, j) => a.grid[(i - 1) * (t.n + 1) + j],
    }
}

/// Entropy of a marginal straight from the atoms.
fn h(t: &JointTable<f64>, vars: &[Var]) -> f64 {
    let mut m: HashMap<Vec<u64>, f64> = HashMap::new();
    for a in &t.atoms {
        *m.entry(vars.iter().map(|&v| value(t, a, v)).collect()).or_default() += a.mass;
    }
    m.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

fn cmi(t: &JointTable<f64>, a: &[Var], b: &[Var], c: &[Var]) -> f64 {
    let u = |xs: &[&[Var]]| xs.concat();
    h(t, &u(&[a, c])) + h(t, &u(&[b, c])) - h(t, &u(&[a, b, c])) - h(t, c)
}

fn tables() -> Vec<(String, JointTable<f64>)> {
    let mut out = Vec::new();
    let algs: Vec<Box<dyn KPassAlgorithm>> = vec![
        Box::new(ParityCompare),
        Box::new(SumMod { k: 2, bits: 2 }),
        Box::new(NoisyStore { k: 2 }),
        Box::new(Threshold { k: 2, threshold: 2 }),
    ];
    for alg in algs {
        for n in 2..=4 {
            for (d, mu) in [("u", ProductDist::<f64>::uniform_bits(n)), ("b", ProductDist::bits(n, 0.3))] {
                out.push((format!("{} n={n} {d}", alg.name()), build_joint(alg.as_ref(), &mu, DEFAULT_BUDGET).unwrap()));
            }
        }
    }
    out
}

#[test]
fn terms_match_an_independent_entropy_oracle() {
    for (name, t) in tables() {
        let r = mic(&t);
        for term in &r.terms {
            let (i, j, l) = (term.i, term.j, term.l);
            // M(≤i, ℓ-1) or M(≤i-1, ℓ-1), plus M(≤i-1, j).
            let upto = if l <= j { i } else { i - 1 };
            let cond: Vec<Var> = (1..=upto).map(|p| Var::M(p, l - 1)).chain((1..i).map(|p| Var::M(p, j))).collect();
            let want = cmi(&t, &[Var::M(i, j)], &[Var::X(l)], &cond);
            assert!((term.bits - want).abs() < 1e-9, "{name} ({i},{j},{l}): {} vs {want}", term.bits);
            assert!(term.bits >= -1e-9, "{name}");
        }
        assert!((r.mic_cond - mic_cond(&t)).abs() < 1e-12);
        assert!(r.cond_terms.iter().all(|x| x.bits >= -1e-9), "{name}");
    }
}

#[test]
fn chain_rule() {
    for (name, t) in tables() {
        let (a, b, c) = ([Var::M(t.k, t.n)], [Var::X(1), Var::X(2)], [Var::M(1, 1)]);
        let whole = t.conditional_mi(&a, &b, &c);
        let parts = t.conditional_mi(&a, &[Var::X(1)], &c) + t.conditional_mi(&a, &[Var::X(2)], &[Var::M(1, 1), Var::X(1)]);
        assert!((whole - parts).abs() < 1e-9, "{name}");
    }
}

#[test]
fn product_inputs_give_vanishing_independence_terms() {
    for (name, t) in tables() {
        for term in independence_terms(&t) {
            assert!(term.bits.abs() <= 1e-9, "{name}: {term:?}");
        }
    }
}

#[test]
fn full_grid_sandwich() {
    let rows = mic_grid(&[2, 3, 4, 5], &[1, 2]).unwrap();
    assert_eq!(rows.len(), 4 * 4 * 2 * 2);
    for r in rows {
        assert!(r.mic_cond <= r.mic + 1e-9, "{r:?}");
        assert!(r.mic <= r.bound_2ksn + 1e-9, "{r:?}");
    }
    assert_eq!(grid_zoo(1).len(), 4);
}

#[test]
fn single_precision_tracks_double() {
    let t64 = build_joint(&SumMod { k: 2, bits: 2 }, &ProductDist::<f64>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
    let t32 = build_joint(&SumMod { k: 2, bits: 2 }, &ProductDist::<f32>::uniform_bits(3), DEFAULT_BUDGET).unwrap();
    assert!((mic(&t64).mic - mic(&t32).mic).abs() < 1e-4);
}
