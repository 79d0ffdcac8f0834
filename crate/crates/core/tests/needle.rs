use needlestream::harness::Profile;
use needlestream::needle::m1::M1Layout;
use needlestream::needle::m2::{group_size, M2Layout};
use needlestream::needle::*;
use needlestream::streams::{gen_uniform, NeedleParams, Source};

fn dense(n: u64) -> NeedleParams {
    NeedleParams::new(1 << 40, n, 1.0 / (n as f64).sqrt()).unwrap()
}

fn sparse(n: u64) -> NeedleParams {
    let l = (n as f64).log2();
    NeedleParams::new(1 << 40, n, 1.0 / (n as f64 * l * l * l).sqrt()).unwrap()
}

#[test]
fn m1_is_deterministic_per_seed() {
    let pr = dense(40_000);
    let cfg = M1Config::default();
    let a = m1_run(Source::needle(pr, 1), pr, &cfg, 2).unwrap();
    let b = m1_run(Source::needle(pr, 1), pr, &cfg, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn m1_separates_the_arms_at_moderate_n() {
    let pr = dense(100_000);
    let cfg = M1Config::default();
    let trials = 40u64;
    let fp = (0..trials).filter(|&s| m1_run(Source::uniform(pr, s), pr, &cfg, 1000 + s).unwrap().verdict == Verdict::One).count();
    let fnr = (0..trials).filter(|&s| m1_run(Source::needle(pr, s), pr, &cfg, 1000 + s).unwrap().verdict != Verdict::One).count();
    assert!((fp + fnr) as f64 / trials as f64 <= 0.2, "fp {fp} fn {fnr}");
}

#[test]
fn m1_live_counters_stay_bounded() {
    let pr = dense(1_000_000);
    let cfg = M1Config::default();
    let c2 = cfg.c2().unwrap() as u64;
    for s in 0..3 {
        let d = m1_run(Source::uniform(pr, s), pr, &cfg, s).unwrap();
        assert!(d.peak_counters <= 64 * c2, "{}", d.peak_counters);
        assert_eq!(d.items_read, 1_000_000);
    }
}

#[test]
fn m1_dropped_counters_outlived_the_grace() {
    let pr = dense(250_000);
    let cfg = M1Config::default();
    let life = m1_observe(Source::uniform(pr, 5), pr, &cfg, 6).unwrap();
    let layout = M1Layout::new(pr, &cfg).unwrap();
    assert_eq!(life.len() as u64, layout.groups * cfg.c2().unwrap() as u64);
    assert!(life.dropped.iter().all(|&l| l > cfg.retention.grace));
}

#[test]
fn m1_survival_decays_fast() {
    let pr = dense(1_000_000);
    let cfg = M1Config::default();
    let mut life = Lifetimes::default();
    for s in 0..4 {
        life.extend(m1_observe(Source::uniform(pr, s), pr, &cfg, 50 + s).unwrap());
    }
    for pt in survival_curve(&life, &[150, 200]) {
        let reference = (-(pt.r as f64) / 5.0).exp();
        let sigma = (reference * (1.0 - reference) / pt.at_risk as f64).sqrt();
        assert!(pt.rate() <= reference + 4.0 * sigma, "{pt:?}");
    }
}

#[test]
fn m2_layout_and_group_sizes() {
    let pr = sparse(1 << 20);
    let cfg = Profile::paper().m2;
    let l = M2Layout::new(pr, &cfg).unwrap();
    assert_eq!(l.blocks, (1.0 / (pr.p * pr.p * pr.n as f64)).ceil() as u64);
    assert_eq!(l.groups, (pr.p * pr.n as f64).round() as u64);
    let sizes: Vec<u64> = (1..=4000).map(|g| group_size(l.group_mean, 3, g)).collect();
    let mean = sizes.iter().sum::<u64>() as f64 / sizes.len() as f64;
    assert!((mean - l.group_mean).abs() <= 4.0 * (l.group_mean / 4000.0).sqrt(), "{mean}");
    assert_eq!(sizes, (1..=4000).map(|g| group_size(l.group_mean, 3, g)).collect::<Vec<_>>());
}

#[test]
fn m2_paper_profile_never_fires_at_desk_scale() {
    let pr = sparse(1 << 20);
    let cfg = Profile::paper().m2;
    let l = M2Layout::new(pr, &cfg).unwrap();
    assert!(l.fire_at > l.groups as f64);
    for s in 0..3 {
        let d = m2_run(Source::needle(pr, s), pr, &cfg, s).unwrap();
        assert_eq!(d.verdict, Verdict::Zero);
        assert_eq!(d.groups, l.groups);
    }
}

#[test]
fn m2_respects_the_memory_cap() {
    let pr = sparse(1 << 20);
    let mut cfg = Profile::desk().m2;
    let cap = cfg.mem_cap_bits.expect("pinned cap");
    for s in 0..5 {
        let d = m2_run(Source::uniform(pr, s), pr, &cfg, s).unwrap();
        assert!(d.verdict == Verdict::Abort || d.peak_bits <= cap);
    }
    cfg.mem_cap_bits = Some(1);
    let d = m2_run(Source::uniform(pr, 0), pr, &cfg, 0).unwrap();
    assert_eq!((d.verdict, d.abort), (Verdict::Abort, Some(AbortReason::MemoryCap)));
}

#[test]
fn m2_aborts_on_short_streams() {
    let pr = sparse(1 << 20);
    let cfg = Profile::paper().m2;
    let short: Vec<_> = Source::uniform(pr, 1).take(10).collect();
    let d = m2_run(short, pr, &cfg, 1).unwrap();
    assert_eq!((d.verdict, d.abort), (Verdict::Abort, Some(AbortReason::Exhausted)));
}

#[test]
fn m2_observe_drops_follow_retention() {
    let pr = sparse(1 << 20);
    let mut cfg = Profile::paper().m2;
    cfg.c1 = 0.01;
    cfg.retention.grace = 0;
    let life = m2_observe(Source::uniform(pr, 2), pr, &cfg, 2).unwrap();
    // Stored counters have c3 ≥ 1, so at ratio 1/100 none can drop before
    // lifespan 100, which exceeds the group count.
    assert!(life.dropped.is_empty());
    assert!(!life.censored.is_empty());
}

/// `P(no repeat within distance < w)` for i.i.d. uniform items, by the
/// product formula when `w ≥ n`.
fn no_collision(t: u64, n: u64) -> f64 {
    (0..n).map(|i| 1.0 - i as f64 / t as f64).product()
}

#[test]
fn collision_baseline_matches_the_birthday_bound() {
    let (t, n, trials) = (2000u64, 40u64, 4000u64);
    let pr = NeedleParams::new(t, n, 0.0).unwrap();
    let hits = (0..trials).filter(|&s| collision_baseline(&gen_uniform(pr, s).items, n as usize) == 1).count() as f64;
    let q = 1.0 - no_collision(t, n);
    let sigma = (q * (1.0 - q) * trials as f64).sqrt();
    assert!((hits - q * trials as f64).abs() <= 4.0 * sigma, "{hits} vs {}", q * trials as f64);
    assert_eq!(collision_baseline(&[1, 2, 1], 3), 1);
    assert_eq!(collision_baseline(&[1, 2, 1], 2), 0);
    assert_eq!(collision_baseline(&[4, 4], 1), 0);
    assert_eq!(collision_baseline(&[4, 4], 2), 1);
}
