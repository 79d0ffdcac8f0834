//! Small estimators used by the harness and the acceptance checks.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Wilson score interval for `k` successes in `n` trials at normal quantile
/// `z`. `None` when `n = 0`.
pub fn wilson(k: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let (lo_exact, hi_exact) = (k == 0, k == n);
    let (k, n) = (k as f64, n as f64);
    let phat = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if lo_exact { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hi_exact { 1.0 } else { (centre + half).min(1.0) };
    Some((lo, hi))
}

/// 95% Wilson interval.
pub fn wilson95(k: u64, n: u64) -> Option<(f64, f64)> {
    wilson(k, n, 1.959_963_984_540_054)
}

pub fn histogram<T: Eq + Hash, I: IntoIterator<Item = T>>(samples: I) -> HashMap<T, u64> {
    let mut h = HashMap::new();
    for s in samples {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

/// Plug-in entropy in bits of the empirical distribution.
pub fn plugin_entropy<T>(counts: &HashMap<T, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum()
}

/// Plug-in entropy plus the Miller–Madow bias correction `(m - 1)/(2N)` nats,
/// in bits.
pub fn miller_madow<T>(counts: &HashMap<T, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let m = counts.values().filter(|&&c| c > 0).count() as f64;
    plugin_entropy(counts) + (m - 1.0) / (2.0 * total as f64 * std::f64::consts::LN_2)
}

/// Pearson goodness of fit: the statistic and its upper-tail p-value.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2, "need at least two cells");
    let total: u64 = observed.iter().sum();
    let mass: f64 = expected.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let e = e / mass * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("positive dof");
    (stat, 1.0 - dist.cdf(stat))
}

/// Nearest-rank percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[u64], q: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        assert_eq!(wilson95(0, 0), None);
        for (k, n) in [(0, 10), (3, 10), (10, 10), (1, 300)] {
            let (lo, hi) = wilson95(k, n).unwrap();
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
        let (lo, hi) = wilson95(50, 100).unwrap();
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn entropies() {
        let h = histogram([1, 2, 3, 4, 1, 2, 3, 4]);
        assert!((plugin_entropy(&h) - 2.0).abs() < 1e-12);
        assert!(miller_madow(&h) > 2.0);
        assert_eq!(plugin_entropy(&histogram(Vec::<u8>::new())), 0.0);
    }

    #[test]
    fn chi_square_flags_bias() {
        let (_, p) = chi_square(&[250, 250, 250, 250], &[1.0; 4]);
        assert!(p > 0.99);
        let (_, p) = chi_square(&[400, 200, 200, 200], &[1.0; 4]);
        assert!(p < 1e-6);
    }

    #[test]
    fn percentiles() {
        let v = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        assert_eq!(percentile(&v, 0.5), Some(5));
        assert_eq!(percentile(&v, 0.99), Some(10));
        assert_eq!(percentile(&v, 0.0), Some(1));
        assert_eq!(percentile(&[], 0.5), None);
    }
}
