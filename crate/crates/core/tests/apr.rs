use needlestream::apr::{apr_init, apr_output, apr_run, apr_step, AprConfig, AprState};
use needlestream::harness::coin::{apr_accuracy, sparse_signs};
use needlestream::rng::{CounterRng, Draw};

fn cfg(n: u64, gamma: f64, budget: f64) -> AprConfig<f64> {
    AprConfig::new(n, gamma, budget).unwrap()
}

#[test]
fn sampling_rate_formula() {
    let c = cfg(4096, 0.5, 64.0);
    let raw = 6000.0 * 144.0 * 64.0 / (0.25 * 4096.0);
    assert!(raw > 1.0);
    assert_eq!(c.p_sample(), 1.0);
    let c = cfg(1 << 20, 1.0, 16384.0);
    assert!(c.p_sample() > 0.0 && c.p_sample() <= 1.0);
    let c = cfg(1 << 20, 1.0, 16384.0).with_sampling_constant(1e-3);
    let expect = 1e-3 * 400.0 * 16384.0 / (1u64 << 20) as f64;
    assert!((c.p_sample() - expect).abs() < 1e-15);
    assert!(apr_init(&cfg(4096, 0.5, 64.0)).is_ok());
}

#[test]
fn zero_updates_and_full_sampling_are_exact() {
    let c = cfg(4096, 0.5, 64.0);
    let mut d = CounterRng::new(1, 0, 0);
    let s = apr_run(&c, &vec![0; 4096], &mut d);
    assert_eq!((s.delta, s.zeta, s.tail, apr_output(&s)), (0, 0, 0, 0.0));
    let a = sparse_signs(4096, 100, 3);
    let s = apr_run(&c, &a, &mut d);
    assert_eq!(s.delta, a.iter().sum::<i64>());
    assert_eq!(s.tail, 0);
    assert_eq!(s.output(), a.iter().sum::<i64>() as f64);
}

#[test]
fn freeze_is_monotone_and_tail_is_exact() {
    let n = 100_000u64;
    let c = cfg(n, 0.05, 20.0).with_sampling_constant(1e-4);
    assert!(c.p_sample() < 1.0);
    let a: Vec<i64> = (0..n).map(|j| if CounterRng::new(9, 1, j).bernoulli(0.6) { 1 } else { -1 }).collect();
    let mut coins = CounterRng::new(9, 2, 0);
    let mut s = AprState::unchecked(&c);
    let mut frozen: Option<(usize, i64, u64)> = None;
    for (j, &x) in a.iter().enumerate() {
        apr_step(&mut s, x, coins.bernoulli(c.p_sample()));
        assert!(s.delta.unsigned_abs() <= s.zeta);
        assert!((s.zeta as f64) <= c.threshold() + 1.0);
        match frozen {
            None if !s.sampling() => frozen = Some((j, s.delta, s.zeta)),
            None => assert_eq!(s.tail, 0),
            Some((_, d, z)) => assert_eq!((s.delta, s.zeta), (d, z)),
        }
    }
    let (crossed, _, _) = frozen.expect("threshold reached");
    assert_eq!(s.tail, a[crossed + 1..].iter().sum::<i64>());
}

#[test]
fn accuracy_at_default_constants() {
    for (n, gamma, budget) in [(1u64 << 12, 0.5, 64.0), (1 << 16, 0.5, 256.0)] {
        let c = cfg(n, gamma, budget);
        let r = apr_accuracy(&c, budget as u64, 2000, n);
        // Budget 1/n³ per trial; 4σ slack around zero expected failures.
        let q = 1.0 / (n as f64).powi(3);
        assert!(r.failures as f64 <= 2000.0 * q + 4.0 * (2000.0 * q).sqrt(), "{r:?}");
    }
}

#[test]
fn squared_error_within_gamma_squared_n() {
    // A reduced constant puts the counter in the sampled regime.
    let n = 1u64 << 16;
    let c = cfg(n, 1.0, 1024.0).with_sampling_constant(0.1);
    assert!(c.p_sample() < 1.0);
    let trials = 2000u64;
    let mse = (0..trials)
        .map(|id| {
            let mut input = CounterRng::new(id, 1, 0);
            let rate = c.budget / n as f64;
            let a: Vec<i64> = (0..n)
                .map(|_| {
                    if input.bernoulli(rate) {
                        if input.bernoulli(0.5) {
                            1
                        } else {
                            -1
                        }
                    } else {
                        0
                    }
                })
                .collect();
            let s = apr_run(&c, &a, &mut CounterRng::new(id, 2, 0));
            (s.output() - a.iter().sum::<i64>() as f64).powi(2)
        })
        .sum::<f64>()
        / trials as f64;
    assert!(mse <= c.gamma * c.gamma * n as f64, "{mse}");
}

#[test]
fn output_is_clamped() {
    let c = cfg(16, 1.5, 7.0).with_sampling_constant(1e-3);
    let mut s = AprState::unchecked(&c);
    s.delta = 5;
    assert!(5.0 / s.p_sample > 16.0);
    assert_eq!(s.output(), 16.0);
    s.delta = -5;
    assert_eq!(s.output(), -16.0);
    let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
    for key in ["delta", "zeta", "gamma", "p_sample", "j"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
