//! Grid search for the sparse detector's constants.
//!
//! Each grid point runs the base experiment with its `(C1, grace, K_out)`
//! and a memory cap of `cap_factor · blocks · counter width`. A point is
//! feasible when at least 99% of trials stay within the cap and at most 30%
//! abort; the pinned point minimizes Err among feasible ones, breaking ties
//! by 99th percentile memory and then by grid order.

use serde::{Deserialize, Serialize};

use super::{run_experiment, Algo, ExperimentConfig, HarnessError, Profile};
use crate::needle::m2::M2Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub c1: Vec<f64>,
    pub grace: Vec<u32>,
    pub kout: Vec<f64>,
    #[serde(default = "default_cap_factor")]
    pub cap_factor: f64,
}

fn default_cap_factor() -> f64 {
    4.0
}

impl Grid {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn points(&self) -> Vec<(f64, u32, f64)> {
        let mut v = Vec::new();
        for &c1 in &self.c1 {
            for &g in &self.grace {
                for &k in &self.kout {
                    v.push((c1, g, k));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c1: f64,
    pub grace: u32,
    pub kout: f64,
    pub mem_cap_bits: u64,
    pub err: Option<f64>,
    pub false_positive: Option<f64>,
    pub false_negative: Option<f64>,
    pub abort_rate: Option<f64>,
    pub within_cap: Option<f64>,
    pub mem_p99: Option<u64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub base: ExperimentConfig,
    pub grid: Grid,
    pub points: Vec<GridPoint>,
    /// Index of the pinned point.
    pub best: Option<usize>,
}

impl Calibration {
    /// The base profile with the pinned constants, named `name`.
    pub fn profile(&self, name: &str) -> Result<Profile, HarnessError> {
        let i = self.best.ok_or_else(|| HarnessError::Config("no grid point meets the memory and abort constraints".into()))?;
        let pt = &self.points[i];
        let mut prof = Profile::resolve(&self.base.profile)?;
        prof.name = name.into();
        prof.m2.c1 = pt.c1;
        prof.m2.retention.grace = pt.grace;
        prof.m2.kout = pt.kout;
        prof.m2.mem_cap_bits = Some(pt.mem_cap_bits);
        Ok(prof)
    }

    /// The pinned profile file: a provenance header then the profile.
    pub fn render(&self, name: &str) -> Result<String, HarnessError> {
        let prof = self.profile(name)?;
        let pt = &self.points[self.best.expect("profile succeeded")];
        let b = &self.base;
        let mut s = String::new();
        s.push_str("# Pinned by `needlestream calibrate`; do not edit by hand.\n");
        s.push_str(&format!(
            "# base: t = {}, n = {}, p = {:e}, trials/arm = {}, master_seed = {}\n",
            b.t, b.n, b.p, b.trials, b.master_seed
        ));
        s.push_str(&format!(
            "# grid: c1 = {:?}, grace = {:?}, kout = {:?}, cap_factor = {}\n",
            self.grid.c1, self.grid.grace, self.grid.kout, self.grid.cap_factor
        ));
        s.push_str(&format!(
            "# pinned point: err = {}, fp = {}, fn = {}, abort = {}, within cap = {}\n",
            fmt(pt.err),
            fmt(pt.false_positive),
            fmt(pt.false_negative),
            fmt(pt.abort_rate),
            fmt(pt.within_cap)
        ));
        s.push_str(&prof.to_toml());
        Ok(s)
    }
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.4}"))
}

pub fn calibrate_profile(base: &ExperimentConfig, grid: &Grid) -> Result<Calibration, HarnessError> {
    if base.algo != Algo::M2 {
        return Err(HarnessError::Config("calibration tunes the sparse detector; set algo = \"m2\"".into()));
    }
    let params = base.params()?;
    let mut points = Vec::new();
    for (c1, grace, kout) in grid.points() {
        let mut cfg = base.clone();
        cfg.overrides.c1 = Some(c1);
        cfg.overrides.grace = Some(grace);
        cfg.overrides.kout = Some(kout);
        let prof = cfg.effective_profile()?;
        let layout = M2Layout::new(params, &prof.m2)?;
        let cap = base
            .overrides
            .mem_cap_bits
            .unwrap_or_else(|| (grid.cap_factor * layout.blocks as f64 * layout.counter_width(prof.m2.c2().unwrap_or(1)) as f64) as u64);
        cfg.overrides.mem_cap_bits = Some(cap);
        let s = run_experiment(&cfg)?.summary;
        let feasible = s.within_cap.is_none_or(|w| w >= 0.99) && s.abort_rate.is_none_or(|a| a <= 0.3);
        let mem_p99 = s.arms.iter().filter_map(|a| a.mem_p99).max();
        points.push(GridPoint {
            c1,
            grace,
            kout,
            mem_cap_bits: cap,
            err: s.err,
            false_positive: s.false_positive,
            false_negative: s.false_negative,
            abort_rate: s.abort_rate,
            within_cap: s.within_cap,
            mem_p99,
            feasible,
        });
    }
    let key = |p: &GridPoint| (p.err.unwrap_or(f64::INFINITY), p.mem_p99.unwrap_or(0));
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.feasible)
        .min_by(|(i, a), (j, b)| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(j)))
        .map(|(i, _)| i);
    Ok(Calibration { base: base.clone(), grid: grid.clone(), points, best })
}
