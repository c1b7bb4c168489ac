//! `nclil`: selftest, inequality batteries and LIL experiments.
//!
//! Exit codes: 0 when every assertion matched (expected failures included),
//! 1 on a mismatch, 2 on usage, configuration or I/O errors.

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use nclil::inequality::{run_battery, BatteryConfig, BatteryOutcome, Exp2Mode, Family, IneqReport};
use nclil::lab::{hw_pipeline, lil_run, ExperimentReport, HwConfig, HwReport, LilConfig};
use nclil::selftest::{run_selftest, FixtureBundle, SelftestReport};

use manifest::RunWriter;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] nclil::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(nclil::Error::NotMartingale(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "nclil", version, about = "Tracial matrix algebra checks and LIL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algebra and conditional-expectation invariant suites plus fixtures.
    Selftest(SelftestArgs),
    /// Run an inequality battery.
    Verify(VerifyArgs),
    /// Run a LIL experiment.
    Lil(LilArgs),
    /// Recompute the hashes recorded in a run manifest.
    Manifest(ManifestArgs),
}

#[derive(Args)]
struct SelftestArgs {
    /// Fixture bundle replacing the built-in one.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random samples per invariant.
    #[arg(long, default_value_t = 16)]
    samples: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gt,
    Igt,
    Expineq,
    Scalars,
    Chebyshev,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gt => Family::Gt,
            FamilyArg::Igt => Family::Igt,
            FamilyArg::Expineq => Family::Expineq,
            FamilyArg::Scalars => Family::Scalars,
            FamilyArg::Chebyshev => Family::Chebyshev,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    AsStated,
    Corrected,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    /// Matrix sizes as `lo..hi`, `lo..=hi` or a single size.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 2]>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Range used for part (2) of the exponential inequality.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Regime {
    Classical,
    Tensor,
    Gue,
    Hw,
}

impl Regime {
    fn name(self) -> &'static str {
        match self {
            Regime::Classical => "classical",
            Regime::Tensor => "tensor",
            Regime::Gue => "gue",
            Regime::Hw => "hw",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Pauli,
    TwoPoint,
    Hermitian,
}

#[derive(Args)]
struct LilArgs {
    #[arg(value_enum)]
    regime: Regime,
    #[arg(long)]
    steps: Option<usize>,
    /// Walks (classical) or sampled paths (tensor, hw).
    #[arg(long)]
    atoms: Option<usize>,
    /// First step of the classical running-maximum window.
    #[arg(long)]
    window: Option<usize>,
    /// GUE matrix size, or the size of a Hermitian step law.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    law: Option<LawArg>,
    /// Two-point law: weight of the large value.
    #[arg(long)]
    p: Option<f64>,
    /// Two-point law: the large value.
    #[arg(long)]
    m: Option<f64>,
    /// Hermitian law: operator norm of each step.
    #[arg(long)]
    scale: Option<f64>,
    /// Clip tensor steps to this operator norm.
    #[arg(long)]
    envelope: Option<f64>,
    /// Truncation constant of the three-way split.
    #[arg(long)]
    e: Option<f64>,
    /// Comma-separated checkpoints.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    /// Comma-separated seeds; may be repeated.
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Trace budget of the s-number and witness ratios.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    delta_prime: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ManifestArgs {
    /// Manifest file or run directory.
    path: PathBuf,
    #[arg(long)]
    json: bool,
}

fn parse_dims(s: &str) -> Result<[usize; 2], String> {
    let bad = || format!("expected lo..hi, lo..=hi or n, got {s:?}");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let lo = lo.trim().parse().map_err(|_| bad())?;
    let hi = hi.trim().parse().map_err(|_| bad())?;
    Ok([lo, hi])
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let v: Value =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(v)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn command_line() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Selftest(a) => cmd_selftest(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Lil(a) => cmd_lil(&a),
        Command::Manifest(a) => cmd_manifest(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_selftest(a: &SelftestArgs) -> Result<bool, CliError> {
    let fixtures = match &a.fixture {
        Some(p) => FixtureBundle::parse(&read_text(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => FixtureBundle::builtin(),
    };
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let report = run_selftest(a.seed, a.samples, &fixtures);
    if a.json {
        print!("{}", pretty(&report));
    } else {
        print!("{}", selftest_text(&report));
    }
    Ok(report.passed())
}

fn selftest_text(r: &SelftestReport) -> String {
    let mut s = String::new();
    for x in &r.results {
        let _ = write!(
            s,
            "{} {:<36} max error {:.3e} (tol {:.0e}, {} samples)",
            if x.passed { "PASS" } else { "FAIL" },
            x.id,
            x.max_error,
            x.tolerance,
            x.samples
        );
        if let Some(d) = &x.detail {
            let _ = write!(s, ": {d}");
        }
        s.push('\n');
    }
    let failed = r.failures();
    let _ = writeln!(s, "{} invariants, {} failed", r.results.len(), failed.len());
    for f in failed {
        let _ = writeln!(s, "failed: {}", f.id);
    }
    s
}

fn verify_config(a: &VerifyArgs) -> Result<BatteryConfig, CliError> {
    let family = Family::from(a.family);
    let mut cfg = match &a.config {
        Some(p) => {
            let v = read_json(p)?;
            let cfg: BatteryConfig =
                serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if cfg.family != family {
                return Err(CliError::Config(format!(
                    "{} describes a {:?} battery, not {:?}",
                    p.display(),
                    cfg.family,
                    family
                )));
            }
            cfg
        }
        None => BatteryConfig::new(family),
    };
    if a.dims.is_some() {
        cfg.dims = a.dims;
    }
    if a.count.is_some() {
        cfg.count = a.count;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::AsStated => Exp2Mode::AsStated,
            ModeArg::Corrected => Exp2Mode::Corrected,
        };
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn reports_csv(reports: &[IneqReport]) -> String {
    let mut s = String::from(IneqReport::csv_header());
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn verify_text(o: &BatteryOutcome) -> String {
    let mut s = String::new();
    let sm = &o.summary;
    let _ = writeln!(
        s,
        "verify {}: {} instances, {} failures, {} hypothesis violations",
        sm.id, sm.instances, sm.failures, sm.hypothesis_violations
    );
    if let Some(w) = &sm.worst {
        let _ = writeln!(
            s,
            "worst instance {} {}: lhs {:.6} rhs {:.6} rel slack {:.3e}",
            w.id, w.instance, w.lhs, w.rhs, w.rel_slack
        );
    }
    for c in &o.checks {
        let _ = writeln!(
            s,
            "{:<9} {:<28} expected {:<4} held {:<5} {}",
            if c.matched() { "MATCHED" } else { "MISMATCH" },
            c.id,
            format!("{:?}", c.expected).to_lowercase(),
            c.held,
            c.detail
        );
    }
    let _ = writeln!(s, "{}", if o.matched() { "all checks matched" } else { "mismatch" });
    s
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, CliError> {
    let cfg = verify_config(a)?;
    let outcome = run_battery(&cfg)?;
    let summary = pretty(&outcome);
    if a.json {
        print!("{summary}");
    } else {
        print!("{}", verify_text(&outcome));
    }
    if let Some(dir) = &a.out {
        RunWriter {
            dir: dir.clone(),
            command: command_line(),
            config_path: a.config.as_ref().map(|p| p.display().to_string()),
            seeds: vec![cfg.seed],
        }
        .finish(&pretty(&cfg), &[("reports.csv", reports_csv(&outcome.reports)), ("summary.json", summary)])?;
        if !a.json {
            println!("wrote {}", dir.display());
        }
    }
    Ok(outcome.matched())
}

fn default_lil(regime: Regime) -> Value {
    match regime {
        Regime::Classical => json!({"generator": "classical", "atoms": 2048, "steps": 200000, "window_start": 1000}),
        Regime::Tensor => json!({"generator": "tensor", "law": {"law": "pauli"}, "steps": 1000}),
        Regime::Gue => json!({"generator": "gue", "dim": 100, "steps": 1000}),
        Regime::Hw => json!({"law": {"law": "two_point", "p": 0.5, "m": 1.0}, "steps": 2000, "e": 0.5}),
    }
}

/// Config file (or regime defaults) overlaid with the flags given on the command line.
fn lil_value(a: &LilArgs) -> Result<Value, CliError> {
    use Regime::*;
    let r = a.regime;
    let allowed: [(&str, bool, &[Regime]); 9] = [
        ("--atoms", a.atoms.is_some(), &[Classical, Tensor, Hw]),
        ("--window", a.window.is_some(), &[Classical]),
        ("--dim", a.dim.is_some(), &[Gue, Tensor, Hw]),
        ("--law", a.law.is_some(), &[Tensor, Hw]),
        ("--p", a.p.is_some(), &[Tensor, Hw]),
        ("--m", a.m.is_some(), &[Tensor, Hw]),
        ("--scale", a.scale.is_some(), &[Tensor, Hw]),
        ("--envelope", a.envelope.is_some(), &[Tensor]),
        ("--e", a.e.is_some(), &[Hw]),
    ];
    for (flag, given, regimes) in allowed {
        if given && !regimes.contains(&r) {
            return Err(CliError::Usage(format!("{flag} does not apply to the {} regime", r.name())));
        }
    }

    let mut v = match &a.config {
        Some(p) => {
            let v = read_json(p)?;
            if r != Hw && v.get("generator").and_then(Value::as_str) != Some(r.name()) {
                return Err(CliError::Config(format!(
                    "{}: \"generator\" must be \"{}\"",
                    p.display(),
                    r.name()
                )));
            }
            v
        }
        None => default_lil(r),
    };
    let obj = v.as_object_mut().expect("object");
    let mut set = |k: &str, x: Value| {
        obj.insert(k.to_string(), x);
    };
    if let Some(x) = a.steps {
        set("steps", json!(x));
    }
    if let Some(x) = a.atoms {
        set("atoms", json!(x));
    }
    if let Some(x) = a.window {
        set("window_start", json!(x));
    }
    if let Some(x) = a.envelope {
        set("envelope", json!(x));
    }
    if let Some(x) = a.e {
        set("e", json!(x));
    }
    if let Some(x) = &a.checkpoints {
        set("checkpoints", json!(x));
    }
    if let Some(x) = &a.seeds {
        set("seeds", json!(x));
    }
    if let Some(x) = a.budget {
        set("trace_budget", json!(x));
    }
    if let Some(x) = a.delta_prime {
        set("delta_prime", json!(x));
    }
    if r == Gue {
        if let Some(x) = a.dim {
            set("dim", json!(x));
        }
    } else if r != Classical {
        let law = obj.entry("law").or_insert_with(|| json!({"law": "pauli"}));
        if let Some(l) = a.law {
            let name = match l {
                LawArg::Pauli => "pauli",
                LawArg::TwoPoint => "two_point",
                LawArg::Hermitian => "hermitian",
            };
            *law = json!({"law": name});
        }
        let law = law
            .as_object_mut()
            .ok_or_else(|| CliError::Config("\"law\" must be an object".into()))?;
        for (k, x) in [("p", a.p), ("m", a.m), ("scale", a.scale)] {
            if let Some(x) = x {
                law.insert(k.into(), json!(x));
            }
        }
        if let Some(x) = a.dim {
            law.insert("dim".into(), json!(x));
        }
    }
    Ok(v)
}

fn lil_rows_text(rep: &ExperimentReport, free_ref: bool) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{:>6} {:>9} {:>12} {:>8} {:>9} {:>10} {:>9} {:>9}",
        "seed", "n", "s2", "u", "op_ratio", "snum_ratio", "witness", "deficit"
    );
    if free_ref {
        let _ = write!(s, " {:>8}", "2/u");
    }
    s.push('\n');
    for r in &rep.rows {
        let _ = write!(
            s,
            "{:>6} {:>9} {:>12.4} {:>8.4} {:>9.4} {:>10.4} {:>9.4} {:>9.4}",
            r.seed, r.n, r.s2, r.u, r.op_ratio, r.snum_ratio, r.witness_ratio, r.deficit
        );
        if free_ref {
            let _ = write!(s, " {:>8.4}", 2.0 / r.u);
        }
        s.push('\n');
    }
    for e in &rep.classical {
        let _ = writeln!(
            s,
            "seed {}: max over n >= {} of |S_n|/sqrt(n L(n)) across atoms: median {:.4}, p99 {:.4}, max {:.4}",
            e.seed, e.window_start, e.median, e.p99, e.max
        );
    }
    s
}

fn checks_text(checks: &[nclil::lab::Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(s, "{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail);
    }
    s
}

fn hw_text(rep: &HwReport) -> String {
    let mut s = String::new();
    for h in &rep.seeds {
        let _ = writeln!(
            s,
            "seed {}: envelope ratio {:.4}, L2 total {:.4}, w budget {:.4e} <= tau(y^2) {:.4}, resum {:.2e}, cross {:.2e}",
            h.seed, h.envelope_max_ratio, h.l2_total, h.w_budget, h.y2, h.resum_error, h.cross_max
        );
    }
    s
}

fn ensemble_csv(rep: &ExperimentReport) -> String {
    let mut s = String::from("seed,atom,max_ratio\n");
    for e in &rep.classical {
        for (i, m) in e.maxima.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", e.seed, i, m);
        }
    }
    s
}

fn cmd_lil(a: &LilArgs) -> Result<bool, CliError> {
    let v = lil_value(a)?;
    let bad = |e: serde_json::Error| CliError::Config(e.to_string());
    let (config_json, seeds, summary, text, passed, mut outputs);
    if a.regime == Regime::Hw {
        let cfg: HwConfig = serde_json::from_value(v).map_err(bad)?;
        let rep = hw_pipeline(&cfg).map_err(config_error)?;
        config_json = pretty(&cfg);
        seeds = cfg.seeds.clone();
        summary = pretty(&rep);
        text = format!(
            "{}{}{}{}",
            lil_rows_text(&rep.experiment, false),
            hw_text(&rep),
            checks_text(&rep.checks),
            checks_text(&rep.experiment.checks)
        );
        passed = rep.passed();
        outputs = vec![("ratios.csv", rep.experiment.csv())];
    } else {
        let cfg: LilConfig = serde_json::from_value(v).map_err(bad)?;
        let rep = lil_run(&cfg).map_err(config_error)?;
        config_json = pretty(&cfg);
        seeds = cfg.seeds.clone();
        summary = pretty(&rep);
        text = format!("{}{}", lil_rows_text(&rep, a.regime == Regime::Gue), checks_text(&rep.checks));
        passed = rep.passed();
        outputs = vec![("ratios.csv", rep.csv())];
        if !rep.classical.is_empty() {
            outputs.push(("ensemble.csv", ensemble_csv(&rep)));
        }
    }
    if a.json {
        print!("{summary}");
    } else {
        print!("{text}");
        println!("{}", if passed { "all checks passed" } else { "check failed" });
    }
    if let Some(dir) = &a.out {
        outputs.push(("summary.json", summary));
        RunWriter {
            dir: dir.clone(),
            command: command_line(),
            config_path: a.config.as_ref().map(|p| p.display().to_string()),
            seeds,
        }
        .finish(&config_json, &outputs)?;
        if !a.json {
            println!("wrote {}", dir.display());
        }
    }
    Ok(passed)
}

/// Validation failures inside a run are configuration errors.
fn config_error(e: nclil::Error) -> CliError {
    match e {
        nclil::Error::InvalidArgument(_) | nclil::Error::DimensionCap { .. } | nclil::Error::Horizon(_) => {
            CliError::Config(e.to_string())
        }
        e => CliError::Core(e),
    }
}

fn cmd_manifest(a: &ManifestArgs) -> Result<bool, CliError> {
    let (dir, m) = manifest::load(&a.path)?;
    let c = manifest::check(&dir, &m)?;
    if a.json {
        let mut out = Map::new();
        out.insert("ok".into(), json!(c.ok()));
        out.insert("check".into(), serde_json::to_value(&c).expect("serializable"));
        print!("{}", pretty(&out));
    } else {
        println!("config hash {}", if c.config_hash_ok { "matches" } else { "DIFFERS" });
        for (p, ok) in &c.outputs {
            println!("{} {}", if *ok { "ok     " } else { "CHANGED" }, p);
        }
    }
    Ok(c.ok())
}
