use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use needlestream::apr::AprConfig;
use needlestream::harness::calibrate::{calibrate_profile, Grid};
use needlestream::harness::checks::{infocost_report, simulate_report};
use needlestream::harness::coin::{apr_accuracy, apr_entropy, coin_simulation};
use needlestream::harness::plots::report_plots;
use needlestream::harness::{
    read_csv, read_survival_csv, run_experiment, run_survival, write_csv, write_survival_csv, Algo, Arm, Check, ExperimentConfig, Kind,
};
use needlestream::streams::{
    gen_coin, gen_local_needle, gen_mostlyeq, gen_needle, gen_strict_turnstile_counter, gen_t_coins, gen_uniform, write_binary, write_text,
    MostlyEqDist, NeedleParams, OrderSpec,
};

#[derive(Parser)]
#[command(name = "needlestream", version, about = "Needle and coin problem streaming experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a stream and write it as text or binary.
    Gen(GenArgs),
    /// Accuracy and state entropy of the approximate sum.
    RunApr(AprArgs),
    /// Needle detection or counter survival experiment.
    RunNeedle(NeedleArgs),
    /// Majority through the one-pass simulation of a k-pass exact sum.
    RunCoin(CoinArgs),
    /// Exact MIC inequalities over the toy grid.
    InfocostCheck(JsonArg),
    /// Exact simulation, reduction and decomposition checks.
    SimulateCheck(JsonArg),
    /// Grid search for the sparse detector's desk profile.
    Calibrate(CalibrateArgs),
    /// Plots and a summary table from trial CSVs.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StreamKind {
    Uniform,
    Needle,
    LocalNeedle,
    Coin,
    Turnstile,
    Tcoins,
    Mostlyeq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: StreamKind,
    /// Domain size.
    #[arg(long, default_value_t = 2)]
    t: u64,
    /// Stream length (per instance for `tcoins`).
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Needle positions for `local-needle`, 1-based and comma separated.
    #[arg(long, value_delimiter = ',')]
    positions: Vec<usize>,
    /// Prefix constant for `turnstile`.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Random interleaving for `tcoins` instead of round robin.
    #[arg(long)]
    random_order: bool,
    /// `P_Eq` instead of `P_U` for `mostlyeq`.
    #[arg(long)]
    eq: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AprArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    budget: f64,
    /// Nonzeros in the accuracy input; `⌊80·B·log n⌋` when absent.
    #[arg(long)]
    nonzeros: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Most accuracy failures allowed.
    #[arg(long, default_value_t = 5)]
    max_failures: u64,
    /// Trials for the entropy experiment; skipped at 0.
    #[arg(long, default_value_t = 0)]
    entropy_trials: u64,
    #[arg(long, default_value_t = 1.2)]
    entropy_factor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct NeedleArgs {
    /// Experiment config file; flags override its values.
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    survival: bool,
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `paper`, `desk` or a profile file.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    kout: Option<f64>,
    #[arg(long)]
    grace: Option<u32>,
    #[arg(long)]
    mem_cap_bits: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    rounds: Vec<u32>,
    #[arg(long)]
    max_err: Option<f64>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    M1,
    M2,
    Collision,
}

#[derive(Args)]
struct CoinArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct JsonArg {
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Base experiment config (`algo = "m2"`).
    base: PathBuf,
    /// Grid file with `c1`, `grace`, `kout` lists.
    grid: PathBuf,
    #[arg(long, default_value = "desk")]
    name: String,
    /// Where to write the pinned profile.
    #[arg(long)]
    out: PathBuf,
    /// Per-point results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial CSVs from `run-needle`.
    #[arg(long = "csv")]
    csvs: Vec<PathBuf>,
    /// Survival CSV from `run-needle --survival`.
    #[arg(long)]
    survival: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Gen(a) => gen(a).map(|_| true),
        Cmd::RunApr(a) => run_apr(a),
        Cmd::RunNeedle(a) => run_needle(a),
        Cmd::RunCoin(a) => {
            let cfg = AprConfig::new(a.n as u64, a.gamma, a.budget)?;
            let r = coin_simulation(a.n, a.k, &cfg, a.trials, a.seed)?;
            emit(&r, a.json.as_deref())?;
            print_checks(&r.checks);
            Ok(r.pass)
        }
        Cmd::InfocostCheck(a) => {
            let r = infocost_report()?;
            emit(&r, a.json.as_deref())?;
            print_checks(&r.checks);
            Ok(r.pass)
        }
        Cmd::SimulateCheck(a) => {
            let r = simulate_report()?;
            emit(&r, a.json.as_deref())?;
            print_checks(&r.checks);
            Ok(r.pass)
        }
        Cmd::Calibrate(a) => calibrate(a),
        Cmd::Report(a) => report(a).map(|_| true),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Pretty JSON to `path`, or to stdout when no path is given.
fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => writeln!(create(p)?, "{text}")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        eprintln!("{} {}: {} (limit {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let params = || NeedleParams::new(a.t, a.n, a.p);
    let (items, t, p, label) = match a.kind {
        StreamKind::Uniform => {
            let s = gen_uniform(params()?, a.seed);
            (s.items, a.t, 0.0, format!("{:?}", s.label))
        }
        StreamKind::Needle => {
            let s = gen_needle(params()?, a.seed);
            (s.items, a.t, a.p, format!("{:?}", s.label))
        }
        StreamKind::LocalNeedle => {
            let s = gen_local_needle(params()?, &a.positions, a.seed)?;
            (s.items, a.t, a.p, format!("{:?}", s.label))
        }
        StreamKind::Coin => {
            let s = gen_coin(a.n, a.seed);
            (s.items, 2, 0.0, format!("{:?}", s.label))
        }
        StreamKind::Turnstile => {
            let s = gen_strict_turnstile_counter(a.n, a.c, a.seed)?;
            (s.items, 2, 0.0, format!("{:?}", s.label))
        }
        StreamKind::Tcoins => {
            let order = if a.random_order { OrderSpec::Random } else { OrderSpec::RoundRobin };
            let (s, good) = gen_t_coins(a.n as usize, a.t as usize, &order, a.seed)?;
            (s.items, 2, 0.0, format!("{:?} order={:?}", s.label, good.s))
        }
        StreamKind::Mostlyeq => {
            let which = if a.eq { MostlyEqDist::MostlyEqual } else { MostlyEqDist::Uniform };
            let s = gen_mostlyeq(a.n as usize, a.t, which, a.seed)?;
            (s.z, a.t, 0.0, format!("alpha={:?}", s.alpha))
        }
    };
    eprintln!("{label}");
    let out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match a.format {
        Format::Text => write_text(out, &items)?,
        Format::Binary => write_binary(out, t, p, &items)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct AprReport {
    accuracy: needlestream::harness::coin::AprAccuracy,
    entropy: Option<needlestream::harness::coin::AprEntropy>,
    checks: Vec<Check>,
    pass: bool,
}

fn run_apr(a: AprArgs) -> Result<bool> {
    let cfg = AprConfig::new(a.n, a.gamma, a.budget)?;
    let nonzeros = a.nonzeros.unwrap_or((80.0 * a.budget * (a.n as f64).log2()).floor() as u64);
    let accuracy = apr_accuracy(&cfg, nonzeros, a.trials, a.seed);
    let mut checks = vec![Check::at_most("accuracy_failures", accuracy.failures as f64, a.max_failures as f64)];
    let entropy = (a.entropy_trials > 0).then(|| apr_entropy(&cfg, &[a.n / 4, a.n / 2, a.n], a.entropy_trials, a.seed ^ 1));
    if let Some(e) = &entropy {
        for row in &e.rows {
            checks.push(Check::at_most(&format!("entropy_step{}", row.step), row.plugin_bits, a.entropy_factor * e.bound_bits));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    let r = AprReport { accuracy, entropy, checks, pass };
    emit(&r, a.json.as_deref())?;
    print_checks(&r.checks);
    Ok(r.pass)
}

fn needle_config(a: &NeedleArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let (Some(t), Some(n), Some(p)) = (a.t, a.n, a.p) else {
                bail!("without a config file, --t, --n and --p are required");
            };
            let algo = match a.algo {
                Some(AlgoArg::M1) | None => "m1",
                Some(AlgoArg::M2) => "m2",
                Some(AlgoArg::Collision) => "collision",
            };
            ExperimentConfig::from_toml(&format!("name = \"cli\"\nalgo = \"{algo}\"\nt = {t}\nn = {n}\np = {p:e}\ntrials = 100\n"))?
        }
    };
    if let Some(algo) = a.algo {
        cfg.algo = match algo {
            AlgoArg::M1 => Algo::M1,
            AlgoArg::M2 => Algo::M2,
            AlgoArg::Collision => Algo::Collision,
        };
    }
    if a.survival {
        cfg.kind = Kind::Survival;
        cfg.arms = vec![Arm::D0];
    }
    cfg.t = a.t.unwrap_or(cfg.t);
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.p = a.p.unwrap_or(cfg.p);
    cfg.trials = a.trials.unwrap_or(cfg.trials);
    cfg.master_seed = a.seed.unwrap_or(cfg.master_seed);
    if let Some(p) = &a.profile {
        cfg.profile = p.clone();
    }
    let o = &mut cfg.overrides;
    o.c1 = a.c1.or(o.c1);
    o.kout = a.kout.or(o.kout);
    o.grace = a.grace.or(o.grace);
    o.mem_cap_bits = a.mem_cap_bits.or(o.mem_cap_bits);
    cfg.window = a.window.or(cfg.window);
    if !a.rounds.is_empty() {
        cfg.rounds = a.rounds.clone();
    }
    cfg.bounds.max_err = a.max_err.or(cfg.bounds.max_err);
    cfg.timing |= a.timing;
    cfg.output.csv = a.csv.clone().or(cfg.output.csv);
    cfg.output.report = a.report.clone().or(cfg.output.report);
    cfg.params()?;
    cfg.effective_profile()?;
    Ok(cfg)
}

fn run_needle(a: NeedleArgs) -> Result<bool> {
    let cfg = needle_config(&a)?;
    match cfg.kind {
        Kind::Detect => {
            let exp = run_experiment(&cfg)?;
            if let Some(path) = &cfg.output.csv {
                write_csv(&exp.records, create(path)?)?;
            }
            emit(&exp.summary, cfg.output.report.as_deref())?;
            print_checks(&exp.summary.checks);
            Ok(exp.summary.pass)
        }
        Kind::Survival => {
            let r = run_survival(&cfg)?;
            if let Some(path) = &cfg.output.csv {
                write_survival_csv(&r.rows, create(path)?)?;
            }
            emit(&r, cfg.output.report.as_deref())?;
            print_checks(&r.checks);
            Ok(r.pass)
        }
    }
}

fn calibrate(a: CalibrateArgs) -> Result<bool> {
    let base = ExperimentConfig::load(&a.base)?;
    let grid = Grid::from_toml(&std::fs::read_to_string(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?)?;
    let cal = calibrate_profile(&base, &grid)?;
    if let Some(path) = &a.json {
        emit(&cal, Some(path))?;
    }
    for pt in &cal.points {
        eprintln!(
            "c1={} grace={} kout={} cap={} err={:?} abort={:?} within_cap={:?} feasible={}",
            pt.c1, pt.grace, pt.kout, pt.mem_cap_bits, pt.err, pt.abort_rate, pt.within_cap, pt.feasible
        );
    }
    match cal.render(&a.name) {
        Ok(text) => {
            write!(create(&a.out)?, "{text}")?;
            eprintln!("pinned profile written to {}", a.out.display());
            Ok(true)
        }
        Err(e) => {
            eprintln!("{e}");
            Ok(false)
        }
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &a.csvs {
        records.extend(read_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?);
    }
    let survival = match &a.survival {
        Some(path) => Some(read_survival_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?),
        None => None,
    };
    std::fs::create_dir_all(&a.out_dir)?;
    let plots = report_plots(&records, survival.as_deref(), &a.out_dir)?;

    let mut groups: std::collections::BTreeMap<(String, String, String), (u64, u64, u64, u64)> = Default::default();
    for r in &records {
        let e = groups.entry((r.algo.clone(), r.profile.clone(), format!("{:e}", r.p))).or_default();
        if r.truth == 0 {
            e.0 += 1;
            e.1 += r.is_error() as u64;
        } else {
            e.2 += 1;
            e.3 += r.is_error() as u64;
        }
    }
    let mut md = String::from("| algo | profile | p | D0 trials | FP | D1 trials | FN | Err |\n|---|---|---|---|---|---|---|---|\n");
    for ((algo, profile, p), (n0, e0, n1, e1)) in &groups {
        let rate = |e: u64, n: u64| if n == 0 { f64::NAN } else { e as f64 / n as f64 };
        let (fp, fnr) = (rate(*e0, *n0), rate(*e1, *n1));
        md.push_str(&format!("| {algo} | {profile} | {p} | {n0} | {fp:.3} | {n1} | {fnr:.3} | {:.3} |\n", fp + fnr));
    }
    if let Some(rows) = &survival {
        md.push_str("\n| r | survived | at risk | rate | e^(-r/5) |\n|---|---|---|---|---|\n");
        for s in rows {
            md.push_str(&format!("| {} | {} | {} | {:.3e} | {:.3e} |\n", s.r, s.survived, s.at_risk, s.rate, s.reference));
        }
    }
    let summary = a.out_dir.join("summary.md");
    write!(create(&summary)?, "{md}")?;
    for p in plots.iter().chain([&summary]) {
        println!("{}", p.display());
    }
    Ok(())
}
