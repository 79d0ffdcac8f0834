//! Experiment plumbing: configs, parallel trials, summaries, calibration and
//! plots.
//!
//! Every trial derives its own seeds from `(master_seed, trial_id)`, trials
//! run on the rayon pool and records are sorted by id before any reduction,
//! so the CSV and the summary do not depend on the schedule.

pub mod calibrate;
pub mod checks;
pub mod coin;
pub mod plots;
pub mod profiles;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::needle::{
    collision_baseline, m1_observe, m1_run, m2_observe, m2_run, survival_curve, Detection, Lifetimes, NeedleError, SurvivalPoint, Verdict,
};
use crate::rng::{hash3, streams as sid};
use crate::stats::{percentile, wilson95};
use crate::streams::{NeedleParams, Source, StreamError};
pub use profiles::Profile;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Needle(#[from] NeedleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    M1,
    M2,
    Collision,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::M1 => "m1",
            Algo::M2 => "m2",
            Algo::Collision => "collision",
        }
    }
}

/// Input distribution of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    D0,
    D1,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::D0 => "d0",
            Arm::D1 => "d1",
        }
    }

    pub fn truth(self) -> u8 {
        match self {
            Arm::D0 => 0,
            Arm::D1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Run the detector on both arms and score it.
    #[default]
    Detect,
    /// Record counter lifetimes under `D0`.
    Survival,
}

/// Values that replace the profile's constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub c1: Option<f64>,
    pub kout: Option<f64>,
    pub grace: Option<u32>,
    pub mem_cap_bits: Option<u64>,
}

/// Bounds checked against the summary. Unset bounds are not asserted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub max_err: Option<f64>,
    /// Largest allowed count of positives on `D0`.
    pub max_false_positives: Option<u64>,
    pub max_abort_rate: Option<f64>,
    /// Least fraction of trials whose peak memory stays within the cap.
    pub min_within_cap: Option<f64>,
    pub max_peak_bits: Option<u64>,
    /// Survival must stay below `e^{-r/5}` plus this many standard errors.
    pub survival_sigmas: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub kind: Kind,
    pub algo: Algo,
    /// `paper`, `desk` or a path to a profile file.
    #[serde(default = "default_profile")]
    pub profile: String,
    pub t: u64,
    pub n: u64,
    pub p: f64,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Collision baseline window.
    pub window: Option<usize>,
    /// Rounds at which survival is reported.
    #[serde(default)]
    pub rounds: Vec<u32>,
    /// Record wall-clock time per trial; off keeps the CSV reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub output: Outputs,
}

fn default_profile() -> String {
    "paper".into()
}

fn default_arms() -> Vec<Arm> {
    vec![Arm::D0, Arm::D1]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<NeedleParams, HarnessError> {
        Ok(NeedleParams::new(self.t, self.n, self.p)?)
    }

    /// The profile with overrides applied.
    pub fn effective_profile(&self) -> Result<Profile, HarnessError> {
        let mut prof = Profile::resolve(&self.profile)?;
        let o = &self.overrides;
        if let Some(c1) = o.c1 {
            prof.m1.c1 = c1;
            prof.m2.c1 = c1;
        }
        if let Some(g) = o.grace {
            match self.algo {
                Algo::M1 => prof.m1.retention.grace = g,
                _ => prof.m2.retention.grace = g,
            }
        }
        if let Some(k) = o.kout {
            prof.m2.kout = k;
        }
        if let Some(cap) = o.mem_cap_bits {
            prof.m2.mem_cap_bits = Some(cap);
        }
        Ok(prof)
    }
}

/// One row of the trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub dist: String,
    pub algo: String,
    pub profile: String,
    pub t: u64,
    pub n: u64,
    pub p: f64,
    pub output: String,
    pub truth: u8,
    pub peak_mem_bits: u64,
    pub runtime_ms: u64,
    pub abort: bool,
}

pub const CSV_HEADER: &str = "trial_id,dist,algo,profile,t,n,p,output,truth,peak_mem_bits,runtime_ms,abort";

impl TrialRecord {
    pub fn is_error(&self) -> bool {
        self.abort || self.output != self.truth.to_string()
    }
}

/// Seeds for the stream and for the detector's own randomness.
pub fn trial_seeds(master: u64, trial_id: u64) -> (u64, u64) {
    (hash3(master, sid::TRIAL, 2 * trial_id), hash3(master, sid::TRIAL, 2 * trial_id + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub dist: Arm,
    pub trials: u64,
    pub ones: u64,
    pub zeros: u64,
    pub aborts: u64,
    /// Fraction of trials with the wrong answer, aborts included.
    pub error_rate: Option<f64>,
    pub wilson95: Option<(f64, f64)>,
    pub mem_p50: Option<u64>,
    pub mem_p90: Option<u64>,
    pub mem_p99: Option<u64>,
    pub mem_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value >= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub profile: Profile,
    pub arms: Vec<ArmSummary>,
    /// `Pr[output ≠ 0 | D0]`.
    pub false_positive: Option<f64>,
    /// `Pr[output ≠ 1 | D1]`.
    pub false_negative: Option<f64>,
    /// Sum of the two, in `[0, 2]`.
    pub err: Option<f64>,
    pub abort_rate: Option<f64>,
    /// Fraction of trials whose peak stayed within the memory cap.
    pub within_cap: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SummaryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: SummaryReport,
}

fn run_one(cfg: &ExperimentConfig, prof: &Profile, params: NeedleParams, arm: Arm, id: u64) -> Result<TrialRecord, HarnessError> {
    let (stream_seed, alg_seed) = trial_seeds(cfg.master_seed, id);
    let source = match arm {
        Arm::D0 => Source::uniform(params, stream_seed),
        Arm::D1 => Source::needle(params, stream_seed),
    };
    let start = Instant::now();
    let det: Detection = match cfg.algo {
        Algo::M1 => m1_run(source, params, &prof.m1, alg_seed)?,
        Algo::M2 => m2_run(source, params, &prof.m2, alg_seed)?,
        Algo::Collision => {
            let w = cfg.window.ok_or_else(|| HarnessError::Config("collision needs `window`".into()))?;
            let items: Vec<_> = source.collect();
            let bit = collision_baseline(&items, w);
            Detection {
                verdict: if bit == 1 { Verdict::One } else { Verdict::Zero },
                abort: None,
                peak_bits: (w as u64) * crate::needle::width(params.t) as u64,
                peak_counters: w as u64,
                items_read: items.len() as u64,
                groups: 0,
            }
        }
    };
    let runtime_ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(TrialRecord {
        trial_id: id,
        dist: arm.as_str().into(),
        algo: cfg.algo.as_str().into(),
        profile: prof.name.clone(),
        t: params.t,
        n: params.n,
        p: params.p,
        output: det.verdict.as_str().into(),
        truth: arm.truth(),
        peak_mem_bits: det.peak_bits,
        runtime_ms,
        abort: det.verdict == Verdict::Abort,
    })
}

/// Runs every arm for `cfg.trials` trials. Arm `a` uses trial ids
/// `a·trials .. (a+1)·trials`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    if cfg.kind != Kind::Detect {
        return Err(HarnessError::Config("use run_survival for survival experiments".into()));
    }
    let params = cfg.params()?;
    let prof = cfg.effective_profile()?;
    let jobs: Vec<(Arm, u64)> =
        cfg.arms.iter().enumerate().flat_map(|(a, &arm)| (0..cfg.trials).map(move |i| (arm, a as u64 * cfg.trials + i))).collect();
    let mut records = jobs.into_par_iter().map(|(arm, id)| run_one(cfg, &prof, params, arm, id)).collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| r.trial_id);
    let summary = summarize(cfg, &prof, &records);
    Ok(Experiment { records, summary })
}

fn arm_summary(arm: Arm, records: &[&TrialRecord]) -> ArmSummary {
    let trials = records.len() as u64;
    let ones = records.iter().filter(|r| r.output == "1").count() as u64;
    let zeros = records.iter().filter(|r| r.output == "0").count() as u64;
    let aborts = records.iter().filter(|r| r.abort).count() as u64;
    let wrong = records.iter().filter(|r| r.is_error()).count() as u64;
    let mut mem: Vec<u64> = records.iter().map(|r| r.peak_mem_bits).collect();
    mem.sort_unstable();
    ArmSummary {
        dist: arm,
        trials,
        ones,
        zeros,
        aborts,
        error_rate: (trials > 0).then(|| wrong as f64 / trials as f64),
        wilson95: wilson95(wrong, trials),
        mem_p50: percentile(&mem, 0.5),
        mem_p90: percentile(&mem, 0.9),
        mem_p99: percentile(&mem, 0.99),
        mem_max: mem.last().copied(),
    }
}

/// Aggregates records that are already sorted by trial id.
pub fn summarize(cfg: &ExperimentConfig, prof: &Profile, records: &[TrialRecord]) -> SummaryReport {
    let arms: Vec<ArmSummary> = cfg
        .arms
        .iter()
        .map(|&arm| {
            let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.dist == arm.as_str()).collect();
            arm_summary(arm, &rs)
        })
        .collect();
    let rate = |arm: Arm| arms.iter().find(|s| s.dist == arm).and_then(|s| s.error_rate);
    let false_positive = rate(Arm::D0);
    let false_negative = rate(Arm::D1);
    let err = match (false_positive, false_negative) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    let total = records.len() as u64;
    let abort_rate = (total > 0).then(|| records.iter().filter(|r| r.abort).count() as f64 / total as f64);
    let cap = match cfg.algo {
        Algo::M2 => prof.m2.mem_cap_bits,
        _ => None,
    };
    let within_cap = match (cap, total) {
        (Some(cap), t) if t > 0 => Some(records.iter().filter(|r| r.peak_mem_bits <= cap).count() as f64 / t as f64),
        _ => None,
    };

    let b = &cfg.bounds;
    let mut checks = Vec::new();
    if let Some(lim) = b.max_err {
        checks.push(Check::at_most("err", err.unwrap_or(f64::NAN), lim));
    }
    if let Some(lim) = b.max_false_positives {
        let fp = arms.iter().find(|s| s.dist == Arm::D0).map_or(f64::NAN, |s| (s.trials - s.zeros) as f64);
        checks.push(Check::at_most("false_positives", fp, lim as f64));
    }
    if let Some(lim) = b.max_abort_rate {
        checks.push(Check::at_most("abort_rate", abort_rate.unwrap_or(f64::NAN), lim));
    }
    if let Some(lim) = b.min_within_cap {
        checks.push(Check::at_least("within_cap", within_cap.unwrap_or(f64::NAN), lim));
    }
    if let Some(lim) = b.max_peak_bits {
        let max = records.iter().map(|r| r.peak_mem_bits).max().map_or(f64::NAN, |m| m as f64);
        checks.push(Check::at_most("peak_bits", max, lim as f64));
    }
    let pass = checks.iter().all(|c| c.pass);
    SummaryReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        profile: prof.clone(),
        arms,
        false_positive,
        false_negative,
        err,
        abort_rate,
        within_cap,
        checks,
        pass,
    }
}

pub fn write_csv<W: std::io::Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<Result<Vec<TrialRecord>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub r: u32,
    pub survived: u64,
    pub at_risk: u64,
    pub rate: f64,
    /// `e^{-r/5}`, the reference curve for the dense detector.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub profile: Profile,
    pub lifetimes: u64,
    pub rows: Vec<SurvivalRow>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Pools counter lifetimes over `trials` streams drawn from `D0`.
pub fn run_survival(cfg: &ExperimentConfig) -> Result<SurvivalReport, HarnessError> {
    let params = cfg.params()?;
    let prof = cfg.effective_profile()?;
    let parts = (0..cfg.trials)
        .into_par_iter()
        .map(|id| {
            let (stream_seed, alg_seed) = trial_seeds(cfg.master_seed, id);
            let src = Source::uniform(params, stream_seed);
            match cfg.algo {
                Algo::M1 => m1_observe(src, params, &prof.m1, alg_seed),
                Algo::M2 => m2_observe(src, params, &prof.m2, alg_seed),
                Algo::Collision => Ok(Lifetimes::default()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut life = Lifetimes::default();
    for part in parts {
        life.extend(part);
    }
    let rows: Vec<SurvivalRow> = survival_curve(&life, &cfg.rounds).into_iter().map(survival_row).collect();
    let mut checks = Vec::new();
    if let Some(k) = cfg.bounds.survival_sigmas {
        for row in &rows {
            let sigma = (row.reference * (1.0 - row.reference) / row.at_risk.max(1) as f64).sqrt();
            checks.push(Check::at_most(&format!("survival_r{}", row.r), row.rate, row.reference + k * sigma));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(SurvivalReport { name: cfg.name.clone(), config: cfg.clone(), profile: prof, lifetimes: life.len() as u64, rows, checks, pass })
}

fn survival_row(pt: SurvivalPoint) -> SurvivalRow {
    SurvivalRow { r: pt.r, survived: pt.survived, at_risk: pt.at_risk, rate: pt.rate(), reference: (-(pt.r as f64) / 5.0).exp() }
}

pub fn write_survival_csv<W: std::io::Write>(rows: &[SurvivalRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_survival_csv<R: std::io::Read>(input: R) -> Result<Vec<SurvivalRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<Result<Vec<SurvivalRow>, _>>()?)
}
