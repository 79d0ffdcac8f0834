//! Three-counter approximate sum of a `{-1, 0, 1}` stream.
//!
//! Nonzero updates are sampled with probability `p` into `Δ` while the sampled
//! nonzero count `ζ` stays below `20·log n·p·B`; after that every update goes
//! straight into the exact tail sum `Γ`. The estimate is `Δ/p + Γ` clamped to
//! `[-n, n]`. Logs are base 2.

use serde::{Deserialize, Serialize};

use crate::kpass::{state_width, unzigzag, zigzag, KPassAlgorithm, Randomness};
use crate::rng::Draw;
use crate::scalar::{from_f64, Real};
use crate::streams::Item;

pub const DEFAULT_SAMPLING_CONSTANT: f64 = 6000.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AprError {
    #[error("need n >= 2, got {0}")]
    TooShort(u64),
    #[error("gamma = {gamma} must exceed 4/sqrt(n) = {min}")]
    GammaTooSmall { gamma: f64, min: f64 },
    #[error("budget B = {budget} must exceed gamma*sqrt(n) = {min}")]
    BudgetTooSmall { budget: f64, min: f64 },
    #[error("non-finite or non-positive parameter")]
    NotFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprConfig<F = f64> {
    pub n: u64,
    /// Accuracy: the target error is `(γ/2)·√n`.
    pub gamma: F,
    /// Expected number of nonzero updates `B`.
    pub budget: F,
    /// Leading constant of the sampling rate.
    pub sampling_constant: F,
}

fn cast<F: Real>(x: f64) -> F {
    from_f64(x)
}

impl<F: Real> AprConfig<F> {
    pub fn new(n: u64, gamma: F, budget: F) -> Result<Self, AprError> {
        let cfg = AprConfig { n, gamma, budget, sampling_constant: cast(DEFAULT_SAMPLING_CONSTANT) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sampling_constant(mut self, c: F) -> Self {
        self.sampling_constant = c;
        self
    }

    pub fn validate(&self) -> Result<(), AprError> {
        if self.n < 2 {
            return Err(AprError::TooShort(self.n));
        }
        let ok = |x: F| x.is_finite() && x > F::zero();
        if !ok(self.gamma) || !ok(self.budget) || !ok(self.sampling_constant) {
            return Err(AprError::NotFinite);
        }
        let root = self.sqrt_n();
        let gmin = cast::<F>(4.0) / root;
        if self.gamma <= gmin {
            return Err(AprError::GammaTooSmall { gamma: self.gamma.to_f64().unwrap(), min: gmin.to_f64().unwrap() });
        }
        let bmin = self.gamma * root;
        if self.budget <= bmin {
            return Err(AprError::BudgetTooSmall { budget: self.budget.to_f64().unwrap(), min: bmin.to_f64().unwrap() });
        }
        Ok(())
    }

    fn n_f(&self) -> F {
        cast(self.n as f64)
    }

    fn sqrt_n(&self) -> F {
        self.n_f().sqrt()
    }

    pub fn log_n(&self) -> F {
        self.n_f().log2()
    }

    /// `min{c·log²n·B/(γ²n), 1}`.
    pub fn p_sample(&self) -> F {
        let l = self.log_n();
        let p = self.sampling_constant * l * l * self.budget / (self.gamma * self.gamma * self.n_f());
        p.min(F::one())
    }

    /// `20·log n·p·B`.
    pub fn threshold(&self) -> F {
        cast::<F>(20.0) * self.log_n() * self.p_sample() * self.budget
    }

    /// `(γ/2)·√n`.
    pub fn accuracy(&self) -> F {
        self.gamma / cast(2.0) * self.sqrt_n()
    }

    /// `40 + 6·log log n + 2·log(B/(γ√n))` bits.
    pub fn entropy_bound(&self) -> F {
        cast::<F>(40.0) + cast::<F>(6.0) * self.log_n().log2() + cast::<F>(2.0) * (self.budget / (self.gamma * self.sqrt_n())).log2()
    }
}

/// Counters of the approximate sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprState<F = f64> {
    pub delta: i64,
    pub zeta: u64,
    /// Exact sum of the updates seen after the sampling phase ended.
    #[serde(rename = "gamma")]
    pub tail: i64,
    pub p_sample: F,
    pub j: u64,
    #[serde(skip)]
    pub threshold: F,
    #[serde(skip)]
    pub n: u64,
}

pub fn apr_init<F: Real>(cfg: &AprConfig<F>) -> Result<AprState<F>, AprError> {
    cfg.validate()?;
    Ok(AprState::unchecked(cfg))
}

impl<F: Real> AprState<F> {
    /// Starts from a configuration without checking its hypotheses.
    pub fn unchecked(cfg: &AprConfig<F>) -> Self {
        AprState { delta: 0, zeta: 0, tail: 0, p_sample: cfg.p_sample(), j: 0, threshold: cfg.threshold(), n: cfg.n }
    }

    pub fn sampling(&self) -> bool {
        cast::<F>(self.zeta as f64) < self.threshold
    }

    /// One update `a ∈ {-1, 0, 1}` with its sampling coin `r`.
    pub fn step(&mut self, a: i64, r: bool) {
        debug_assert!((-1..=1).contains(&a));
        if self.sampling() {
            if r {
                self.delta += a;
                self.zeta += (a != 0) as u64;
            }
        } else {
            self.tail += a;
        }
        self.j += 1;
    }

    /// Draws the sampling coin from `d` and applies the update.
    pub fn step_with<D: Draw>(&mut self, a: i64, d: &mut D) {
        let r = d.bernoulli(self.p_sample.to_f64().unwrap());
        self.step(a, r);
    }

    /// `Δ/p + Γ` clamped to `[-n, n]`.
    pub fn output(&self) -> F {
        let n = cast::<F>(self.n as f64);
        let est = cast::<F>(self.delta as f64) / self.p_sample + cast(self.tail as f64);
        est.min(n).max(-n)
    }

    /// The counters alone, as compared by the entropy estimator.
    pub fn counters(&self) -> (i64, u64, i64) {
        (self.delta, self.zeta, self.tail)
    }

    pub fn to_json(&self) -> String
    where
        F: Serialize,
    {
        serde_json::to_string(self).expect("plain data")
    }
}

pub fn apr_step<F: Real>(state: &mut AprState<F>, a: i64, r: bool) {
    state.step(a, r)
}

pub fn apr_output<F: Real>(state: &AprState<F>) -> F {
    state.output()
}

/// Runs the counter over a whole stream with sampling coins from `d`.
pub fn apr_run<F: Real, D: Draw>(cfg: &AprConfig<F>, a: &[i64], d: &mut D) -> AprState<F> {
    let mut s = AprState::unchecked(cfg);
    for &x in a {
        s.step_with(x, d);
    }
    s
}

/// The counter as a one-pass algorithm over `{-1, 0, 1}` items, with `Δ`, `ζ`
/// and `Γ` packed into fixed-width fields of the state code.
#[derive(Debug, Clone)]
pub struct AprAlgorithm {
    pub cfg: AprConfig<f64>,
    widths: [u32; 3],
}

impl AprAlgorithm {
    pub fn new(cfg: AprConfig<f64>) -> Self {
        let cap = cfg.threshold().ceil() as u64 + 1;
        let widths = [state_width(zigzag(-(cap as i64))).max(1), state_width(cap).max(1), state_width(zigzag(cfg.n as i64)).max(1)];
        AprAlgorithm { cfg, widths }
    }

    pub fn field_widths(&self) -> [u32; 3] {
        self.widths
    }

    pub fn encode(&self, s: &AprState<f64>) -> u64 {
        let [wd, wz, _] = self.widths;
        zigzag(s.delta) | (s.zeta << wd) | (zigzag(s.tail) << (wd + wz))
    }

    pub fn decode(&self, code: u64, j: u64) -> AprState<f64> {
        let [wd, wz, _] = self.widths;
        let mut s = AprState::unchecked(&self.cfg);
        s.delta = unzigzag(code & ((1 << wd) - 1));
        s.zeta = (code >> wd) & ((1 << wz) - 1);
        s.tail = unzigzag(code >> (wd + wz));
        s.j = j;
        s
    }
}

impl KPassAlgorithm for AprAlgorithm {
    fn name(&self) -> String {
        "apr".into()
    }
    fn passes(&self) -> usize {
        1
    }
    fn memory_bits(&self) -> u32 {
        self.widths.iter().sum()
    }
    fn initial_state(&self) -> u64 {
        0
    }
    fn randomness(&self, _: usize, _: usize) -> Randomness {
        Randomness::Bernoulli(self.cfg.p_sample())
    }
    fn transition(&self, _: usize, j: usize, x: Item, state: u64, r: u32) -> u64 {
        let mut s = self.decode(state, j as u64 - 1);
        s.step(x, r == 1);
        self.encode(&s)
    }
    fn output(&self, state: u64) -> i64 {
        self.decode(state, self.cfg.n).output().round() as i64
    }
    fn declared_len(&self) -> Option<usize> {
        Some(self.cfg.n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn clamped_rate() {
        let cfg = AprConfig::new(4096, 0.5, 64.0).unwrap();
        assert_eq!(cfg.p_sample(), 1.0);
        assert_eq!(cfg.threshold(), 20.0 * 12.0 * 64.0);
        assert_eq!(cfg.accuracy(), 16.0);
        let big = AprConfig::new(1 << 20, 1.0f64, (1u64 << 14) as f64).unwrap();
        let raw = 6000.0 * 400.0 * 16384.0 / (1u64 << 20) as f64;
        assert_eq!(raw, 37500.0);
        assert_eq!(big.p_sample(), 1.0);
    }

    #[test]
    fn hypotheses_are_enforced() {
        assert!(matches!(AprConfig::new(4096, 0.05f64, 64.0), Err(AprError::GammaTooSmall { .. })));
        assert!(matches!(AprConfig::new(4096, 0.5f64, 31.0), Err(AprError::BudgetTooSmall { .. })));
        assert!(matches!(AprConfig::new(1, 5.0f64, 64.0), Err(AprError::TooShort(1))));
        assert!(matches!(AprConfig::new(4096, f64::NAN, 64.0), Err(AprError::NotFinite)));
    }

    #[test]
    fn zero_update_changes_nothing() {
        let cfg = AprConfig::new(100, 1.0, 20.0).unwrap();
        let mut s = apr_init(&cfg).unwrap();
        for r in [true, false] {
            apr_step(&mut s, 0, r);
        }
        assert_eq!(s.counters(), (0, 0, 0));
        assert_eq!(s.j, 2);
        assert_eq!(apr_output(&s), 0.0);
    }

    #[test]
    fn exact_when_every_update_is_sampled() {
        let cfg = AprConfig::new(1000, 1.0, 40.0).unwrap();
        assert_eq!(cfg.p_sample(), 1.0);
        let a: Vec<i64> = (0..1000)
            .map(|i| {
                if i % 97 == 0 {
                    1
                } else if i % 89 == 0 {
                    -1
                } else {
                    0
                }
            })
            .collect();
        let s = apr_run(&cfg, &a, &mut CounterRng::new(0, 0, 0));
        assert_eq!(s.tail, 0);
        assert_eq!(s.delta, a.iter().sum::<i64>());
        assert_eq!(s.output(), a.iter().sum::<i64>() as f64);
    }

    #[test]
    fn single_precision_agrees() {
        let c32 = AprConfig::new(4096, 0.5f32, 64.0).unwrap();
        let c64 = AprConfig::new(4096, 0.5f64, 64.0).unwrap();
        assert_eq!(c32.p_sample() as f64, c64.p_sample());
        assert!((c32.entropy_bound() as f64 - c64.entropy_bound()).abs() < 1e-4);
    }

    #[test]
    fn json_dump_fields() {
        let cfg = AprConfig::new(100, 1.0, 20.0).unwrap();
        let mut s = apr_init(&cfg).unwrap();
        s.step(1, true);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["delta", "gamma", "j", "p_sample", "zeta"]);
        assert_eq!(v["delta"], 1);
    }

    #[test]
    fn packing_roundtrip() {
        let alg = AprAlgorithm::new(AprConfig::new(64, 1.0, 10.0).unwrap());
        let mut s = AprState::unchecked(&alg.cfg);
        s.delta = -5;
        s.zeta = 9;
        s.tail = -64;
        s.j = 3;
        assert_eq!(alg.decode(alg.encode(&s), 3), s);
    }
}
