use needlestream::apr::{AprAlgorithm, AprConfig};
use needlestream::kpass::zoo::{Constant, Counter, ExactSum, ParityCompare, StoreFirst, SumMod, Threshold};
use needlestream::kpass::{
    peak_memory_bits, run_k_pass, state_width, KPassAlgorithm, KPassError, NoTape, RecordedTape, SeededTape, TableAlgorithm,
};
use needlestream::streams::Item;

fn all_bits(n: usize) -> Vec<Vec<Item>> {
    (0..1u32 << n).map(|m| (0..n).map(|j| if m >> j & 1 == 1 { 1 } else { -1 }).collect()).collect()
}

fn grid(alg: &dyn KPassAlgorithm, x: &[Item]) -> Vec<Vec<u64>> {
    let t = run_k_pass(alg, x, true, &mut NoTape).unwrap();
    (1..=alg.passes()).map(|i| (0..=x.len()).map(|j| t.state(i, j).unwrap()).collect()).collect()
}

/// Independent state-by-state models of the zoo members.
fn expected_grid(name: &str, k: usize, x: &[Item]) -> Vec<Vec<u64>> {
    let n = x.len();
    let mut rows = Vec::new();
    let mut state: i64 = 0;
    for pass in 1..=k {
        let mut row = vec![state as u64];
        for (idx, &xj) in x.iter().enumerate() {
            state = match name {
                "constant" => 0,
                "store-first" if pass == 1 && idx == 0 => {
                    if xj > 0 {
                        2
                    } else {
                        1
                    }
                }
                "store-first" => state,
                "sum-mod-4" => (state + xj).rem_euclid(4),
                "threshold-2" => {
                    if xj > 0 {
                        (state + 1).min(2)
                    } else {
                        state
                    }
                }
                _ => unreachable!(),
            };
            row.push(state as u64);
        }
        assert_eq!(row.len(), n + 1);
        rows.push(row);
    }
    rows
}

#[test]
fn zoo_matches_exhaustive_models() {
    for k in 1..=3 {
        let zoo: Vec<(&str, Box<dyn KPassAlgorithm>)> = vec![
            ("constant", Box::new(Constant { k })),
            ("store-first", Box::new(StoreFirst { k })),
            ("sum-mod-4", Box::new(SumMod { k, bits: 2 })),
            ("threshold-2", Box::new(Threshold { k, threshold: 2 })),
        ];
        for n in 0..=6 {
            for x in all_bits(n) {
                for (name, alg) in &zoo {
                    assert_eq!(grid(alg.as_ref(), &x), expected_grid(name, k, &x), "{name} k={k} x={x:?}");
                }
            }
        }
    }
}

#[test]
fn handoff_holds_everywhere() {
    for x in all_bits(5) {
        for alg in [Box::new(SumMod { k: 3, bits: 2 }) as Box<dyn KPassAlgorithm>, Box::new(ParityCompare), Box::new(StoreFirst { k: 3 })] {
            let t = run_k_pass(alg.as_ref(), &x, true, &mut NoTape).unwrap();
            for i in 1..alg.passes() {
                assert_eq!(t.state(i + 1, 0), t.state(i, 5));
            }
        }
    }
}

#[test]
fn parity_compare_hand_table() {
    // (x, parity of positives, whether x_1's bit equals it)
    for x in all_bits(3) {
        let parity = x.iter().filter(|&&v| v > 0).count() as u64 % 2;
        let first = (x[0] > 0) as u64;
        let t = run_k_pass(&ParityCompare, &x, true, &mut NoTape).unwrap();
        assert_eq!(t.end_state(1), Some(parity));
        assert_eq!(t.state(2, 1), Some(parity | ((parity == first) as u64) << 1));
        assert_eq!(t.output, (parity == first) as i64);
    }
}

#[test]
fn exact_sum_and_counter_widths() {
    let t = run_k_pass(&ExactSum::new(1, 3), &[1, -1, 1], false, &mut NoTape).unwrap();
    assert_eq!(t.output, 1);
    assert!(t.grid.is_none());
    let t = run_k_pass(&Counter { n: 255 }, &vec![1; 255], true, &mut NoTape).unwrap();
    assert_eq!(peak_memory_bits(&t), 8);
    let t = run_k_pass(&Constant { k: 2 }, &[1, -1], true, &mut NoTape).unwrap();
    assert_eq!(peak_memory_bits(&t), state_width(0));
    assert!(matches!(run_k_pass(&ExactSum::new(1, 3), &[1], false, &mut NoTape), Err(KPassError::LengthMismatch { .. })));
}

#[test]
fn apr_as_a_one_pass_algorithm_stays_in_range() {
    let cfg = AprConfig::new(4096, 0.5, 64.0).unwrap();
    let alg = AprAlgorithm::new(cfg);
    // Δ and ζ live in ±(threshold + 1), Γ in ±n.
    let cap = cfg.threshold().ceil() as i64 + 1;
    let range_bits = state_width((2 * cap) as u64) + state_width(cap as u64) + state_width(2 * 4096);
    let x: Vec<Item> = (0..4096).map(|j| [1, -1, 0, 1][j % 4]).collect();
    let t = run_k_pass(&alg, &x, true, &mut SeededTape(3)).unwrap();
    assert!(peak_memory_bits(&t) <= range_bits);
    assert_eq!(t.output, x.iter().sum::<i64>());
}

#[test]
fn replay_reproduces_the_grid() {
    let cfg = AprConfig::new(1 << 12, 0.2, 30.0).unwrap();
    let alg = AprAlgorithm::new(cfg.with_sampling_constant(0.01));
    let x: Vec<Item> = (0..1 << 12).map(|j| if j % 3 == 0 { 1 } else { -1 }).collect();
    let a = run_k_pass(&alg, &x, true, &mut SeededTape(11)).unwrap();
    assert!(alg.cfg.p_sample() < 1.0);
    let b = run_k_pass(&alg, &x, true, &mut RecordedTape { n: x.len(), symbols: &a.tape }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn table_file_loads_and_runs() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/parity.table")).unwrap();
    let alg = TableAlgorithm::parse(&text).unwrap();
    for x in all_bits(4) {
        let parity = x.iter().filter(|&&v| v > 0).count() as i64 % 2;
        assert_eq!(run_k_pass(&alg, &x, false, &mut NoTape).unwrap().output, parity);
    }
    assert_eq!(TableAlgorithm::parse(&alg.to_text()).unwrap(), alg);
    let bad = text.replace("row * 1 1 0", "row * 1 1 7");
    assert!(TableAlgorithm::parse(&bad).is_err());
}
