//! Command-line front door: argument parsing, JSON and CSV report
//! emission, the golden-constants freezer, and the checklist driver.
//!
//! Exit codes are part of the interface: 0 for success, 1 for usage or
//! input errors (including precondition violations such as a composite
//! modulus), 2 when a computation ran but an asserted property failed.
//! Panics raised by library-level assertions are caught and mapped to
//! exit code 2 as well.
//!
//! Machine reports are JSON with a fixed envelope:
//!
//! ```text
//! {
//!   "schema": 1,
//!   "build": "0.1.0+1a2b3c4",
//!   "golden_version": 3,          // null when no golden file is readable
//!   "run": { "argv": [...], "threads": 1, "golden_path": "..." },
//!   "report": { ... }             // subcommand-specific body
//! }
//! ```
//!
//! The `argv` field holds the effective argument vector after
//! `--config` expansion, so re-running `expsum` with exactly those
//! arguments (and the same golden file version) reproduces the report.
//!
//! Golden constants live in a JSON file maintained by `oracle-freeze`;
//! the path resolves from `--golden`, then the `EXPSUM_GOLDEN`
//! environment variable, then [`GOLDEN_DEFAULT_PATH`]. A `--config
//! FILE` of `key = value` lines supplies defaults for any long flags;
//! explicit flags win.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bilinear::{self, BoundName, CoefficientFamily, CongruenceFamily, Sign};
use crate::complete_sums;
use crate::correlation;
use crate::dirichlet::{self, Parity};
use crate::exponent_opt::{self, Rat};
use crate::ffq::PrimeModulus;
use crate::kloosterman;
use crate::modforms::{self, CoefficientKind};
use crate::suite::{self, Level, SuiteContext};

/// Where the frozen constants live when neither `--golden` nor
/// `EXPSUM_GOLDEN` points elsewhere.
pub const GOLDEN_DEFAULT_PATH: &str = "golden/expsum_golden.json";

/// Keys the freezer writes and the checklist reads.
pub const GOLDEN_R1: &str = "r1_complete_scan";
pub const GOLDEN_C2: &str = "c2_correlation_offdiag";
pub const GOLDEN_C3: &str = "c3_bilinear_type_ii";
pub const GOLDEN_C4: &str = "c4_shifted_ratio";
pub const GOLDEN_C5: &str = "c5_diagonal_residue";
pub const GOLDEN_M4_101: &str = "m4_q101";
pub const GOLDEN_MIXED_31: &str = "mixed_moment_q31";

const SCHEMA_VERSION: u32 = 1;

fn build_id() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("EXPSUM_BUILD_ID"))
}

// ---------------------------------------------------------------------
// Golden constants
// ---------------------------------------------------------------------

/// One frozen constant with enough provenance to re-run its oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenConstant {
    pub value: f64,
    /// The command or call that produced the value.
    pub oracle: String,
    /// Freeze date, UTC.
    pub date: String,
    /// Moduli the oracle visited, with side measurements.
    pub q_range: String,
}

/// Versioned store of oracle-frozen regression constants. Values only
/// change through `oracle-freeze`, which rewrites the file and bumps
/// the version.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GoldenFile {
    pub version: u32,
    pub constants: BTreeMap<String, GoldenConstant>,
}

impl GoldenFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("golden file {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("golden file {}: {e}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<(), String> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)
                    .map_err(|e| format!("creating {}: {e}", dir.display()))?;
            }
        }
        let text = serde_json::to_string_pretty(self).expect("golden file serializes");
        fs::write(path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.constants.get(key).map(|c| c.value)
    }

    /// Flag beats environment beats the default location.
    pub fn resolve_path(flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os("EXPSUM_GOLDEN") {
            return PathBuf::from(p);
        }
        PathBuf::from(GOLDEN_DEFAULT_PATH)
    }
}

// ---------------------------------------------------------------------
// Run configuration and report envelope
// ---------------------------------------------------------------------

/// Everything needed to reproduce a run: the effective argument vector
/// after config-file expansion, the worker count, and the golden path.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub argv: Vec<String>,
    pub threads: usize,
    pub golden_path: String,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema: u32,
    build: String,
    golden_version: Option<u32>,
    run: RunConfig,
    report: T,
}

struct RunCtx {
    run: RunConfig,
    golden_path: PathBuf,
    golden_version: Option<u32>,
}

enum CliError {
    /// Bad arguments or bad input data; exit 1.
    Usage(String),
    /// The computation ran and an asserted property failed; exit 2.
    Assertion(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Assertion(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

// ---------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "expsum",
    version,
    about = "Workbench for exponential-sum and L-function moment experiments at prime moduli"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads (default: all cores); 1 is bit-reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Golden-constants file (overrides EXPSUM_GOLDEN and the default).
    #[arg(long, global = true)]
    golden: Option<PathBuf>,
    /// File of `key = value` defaults for long flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Table of normalized sums Kl(a;q) as CSV rows.
    Kloosterman(KloostermanArgs),
    /// Scan |twisted complete sum|/q over a shift-quadruple family.
    CompleteScan(CompleteScanArgs),
    /// Scan the correlation-sum ratios against the q^{3/2} normalizer.
    ConjectureScan(ConjectureScanArgs),
    /// One bilinear form against the requested bound shapes.
    Bilinear(BilinearArgs),
    /// Character-orthogonality sweep at one modulus.
    Ortho(OrthoArgs),
    /// Fourth moment of central L-values at one modulus.
    M4(M4Args),
    /// Dual-route check of the parity-restricted fourth moment.
    DecompCheck(DecompCheckArgs),
    /// Residual of the twisted-sum duality for one (f, a, c, X).
    Voronoi(VoronoiArgs),
    /// Ramanujan tau value, exact and normalized.
    Tau(TauArgs),
    /// Cuspidal-by-Eisenstein moment against its main term.
    MixedMoment(MixedMomentArgs),
    /// Exact max-min optimum of a piecewise-linear program file.
    Optimize(OptimizeArgs),
    /// Re-run the oracles and rewrite the golden-constants file.
    OracleFreeze(OracleFreezeArgs),
    /// Run the verification checklist, one pass/fail line per item.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct KloostermanArgs {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// Write the CSV here instead of stdout and print a summary line.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteScanArgs {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// Shift entries range over (B, 2B].
    #[arg(long = "B", default_value_t = 2)]
    b: u64,
    /// Comma-separated twist frequencies.
    #[arg(long = "h", value_delimiter = ',', default_value = "0,1,50")]
    h: Vec<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConjectureScanArgs {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// Shift entries range over (B, 2B].
    #[arg(long = "B", default_value_t = 2)]
    b: u64,
    /// Refuse scans whose dominant cost exceeds this many cell builds.
    #[arg(long, default_value_t = 1u64 << 25)]
    budget: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BilinearArgs {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// First support length: alpha lives on 1..=M.
    #[arg(long = "M")]
    m: u64,
    /// Second support length: beta lives on 1..=N.
    #[arg(long = "N")]
    n: u64,
    /// Twist multiplier inside Kl(a*m*n).
    #[arg(long, default_value_t = 1)]
    a: u64,
    /// ones | rademacher:SEED | divisor | tau.
    #[arg(long, default_value = "ones")]
    alpha: String,
    /// ones | rademacher:SEED | divisor | tau.
    #[arg(long, default_value = "ones")]
    beta: String,
    /// Comma-separated bound names, e.g. trivial,typeII.
    #[arg(long, value_delimiter = ',', default_value = "trivial,typeII")]
    bounds: Vec<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrthoArgs {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// Character parity: +1 or -1.
    #[arg(long, allow_hyphen_values = true, default_value = "+1")]
    sigma: String,
    /// Largest m and n scanned.
    #[arg(long, default_value_t = 20)]
    limit: u64,
}

#[derive(Args)]
struct M4Args {
    /// Prime modulus.
    #[arg(long)]
    q: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecompCheckArgs {
    /// Prime modulus, at most 61.
    #[arg(long)]
    q: u64,
    /// Character parity: +1 or -1.
    #[arg(long, allow_hyphen_values = true, default_value = "+1")]
    sigma: String,
    /// Truncate the congruence sums at m*n <= cutoff * q^2.
    #[arg(long, default_value_t = 100.0)]
    cutoff: f64,
}

#[derive(Args)]
struct VoronoiArgs {
    /// Coefficient system: divisor | tau.
    #[arg(long)]
    f: String,
    /// Numerator of the additive twist a/c.
    #[arg(long)]
    a: u64,
    /// Twist denominator, 1..=30, coprime to a.
    #[arg(long)]
    c: u64,
    /// Window scale: the bump is supported on (X/2, 2X).
    #[arg(long = "X")]
    x: f64,
}

#[derive(Args)]
struct TauArgs {
    /// Coefficient index, at most 10^6.
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct MixedMomentArgs {
    /// Prime modulus in 5..=61.
    #[arg(long)]
    q: u64,
    /// Truncate at m*n <= cutoff * q^2.
    #[arg(long, default_value_t = 100.0)]
    cutoff: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Program file in the .plp format.
    #[arg(long)]
    program: PathBuf,
    /// Exact rational the optimum must equal, e.g. -1/68.
    #[arg(long, allow_hyphen_values = true)]
    expect: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleFreezeArgs {
    /// all, or a comma list of r1,c2,c3,c4,c5,m4,mixed.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    scope: Vec<String>,
}

#[derive(Args)]
struct SuiteArgs {
    /// quick runs the whole checklist; full adds the report-only sweeps.
    #[arg(long, default_value = "quick")]
    level: String,
    /// Directory holding the shipped .plp programs.
    #[arg(long, default_value = "programs")]
    programs: PathBuf,
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Err(msg) = expand_config(&mut argv) {
        eprintln!("error: {msg}");
        return 1;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };

    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };

    let golden_path = GoldenFile::resolve_path(cli.golden.as_deref());
    let ctx = RunCtx {
        run: RunConfig {
            argv: argv
                .iter()
                .skip(1)
                .map(|s| s.to_string_lossy().into_owned())
                .collect(),
            threads,
            golden_path: golden_path.display().to_string(),
        },
        golden_version: GoldenFile::load(&golden_path).ok().map(|g| g.version),
        golden_path,
    };

    // Library asserts signal broken invariants; surface them as exit 2
    // with the message instead of an abort trace.
    let outcome = catch_unwind(AssertUnwindSafe(|| pool.install(|| dispatch(&cli.cmd, &ctx))));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
        Err(payload) => {
            eprintln!("assertion failed: {}", panic_text(payload.as_ref()));
            2
        }
    }
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "(non-string panic payload)".to_string()
    }
}

/// Splice `--config FILE` contents into the argument vector, right
/// after the subcommand so later (explicit) flags override them.
fn expand_config(argv: &mut Vec<OsString>) -> Result<(), String> {
    let mut found: Option<(usize, usize, PathBuf)> = None;
    for i in 1..argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            let path = argv
                .get(i + 1)
                .ok_or_else(|| "--config needs a path".to_string())?;
            found = Some((i, 2, PathBuf::from(path)));
            break;
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            found = Some((i, 1, PathBuf::from(rest.to_string())));
            break;
        }
    }
    let Some((pos, width, path)) = found else {
        return Ok(());
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut inject: Vec<OsString> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", idx + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", idx + 1));
        }
        inject.push(format!("--{key}").into());
        let value = value.trim();
        if !value.is_empty() {
            inject.push(value.into());
        }
    }
    argv.splice(pos..pos + width, std::iter::empty::<OsString>());
    if argv.len() < 2 {
        return Err("config file given but no subcommand".to_string());
    }
    argv.splice(2..2, inject);
    Ok(())
}

fn dispatch(cmd: &Cmd, ctx: &RunCtx) -> Result<(), CliError> {
    match cmd {
        Cmd::Kloosterman(a) => cmd_kloosterman(a),
        Cmd::CompleteScan(a) => cmd_complete_scan(a, ctx),
        Cmd::ConjectureScan(a) => cmd_conjecture_scan(a, ctx),
        Cmd::Bilinear(a) => cmd_bilinear(a, ctx),
        Cmd::Ortho(a) => cmd_ortho(a, ctx),
        Cmd::M4(a) => cmd_m4(a, ctx),
        Cmd::DecompCheck(a) => cmd_decomp_check(a, ctx),
        Cmd::Voronoi(a) => cmd_voronoi(a, ctx),
        Cmd::Tau(a) => cmd_tau(a, ctx),
        Cmd::MixedMoment(a) => cmd_mixed_moment(a, ctx),
        Cmd::Optimize(a) => cmd_optimize(a, ctx),
        Cmd::OracleFreeze(a) => cmd_oracle_freeze(a, ctx),
        Cmd::Suite(a) => cmd_suite(a, ctx),
    }
}

fn emit<T: Serialize>(ctx: &RunCtx, out: Option<&Path>, report: T) -> Result<(), CliError> {
    let envelope = Envelope {
        schema: SCHEMA_VERSION,
        build: build_id(),
        golden_version: ctx.golden_version,
        run: ctx.run.clone(),
        report,
    };
    let text = serde_json::to_string_pretty(&envelope).expect("report serializes");
    match out {
        Some(path) => {
            fs::write(path, text + "\n")
                .map_err(|e| usage(format!("writing {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Flag value parsers
// ---------------------------------------------------------------------

fn parse_parity(s: &str) -> Result<Parity, CliError> {
    match s {
        "+1" | "1" | "even" => Ok(Parity::Even),
        "-1" | "odd" => Ok(Parity::Odd),
        other => Err(CliError::Usage(format!(
            "--sigma takes +1 or -1, got `{other}`"
        ))),
    }
}

fn parity_str(p: Parity) -> &'static str {
    match p {
        Parity::Even => "+1",
        Parity::Odd => "-1",
    }
}

fn parse_family(s: &str) -> Result<CoefficientFamily, CliError> {
    match s {
        "ones" => Ok(CoefficientFamily::Ones),
        "divisor" => Ok(CoefficientFamily::Divisor),
        "tau" => Ok(CoefficientFamily::Tau),
        other => other
            .strip_prefix("rademacher:")
            .and_then(|seed| seed.parse::<u64>().ok())
            .map(CoefficientFamily::Rademacher)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "coefficient family `{other}` is not ones, rademacher:SEED, divisor, or tau"
                ))
            }),
    }
}

fn parse_bound(s: &str) -> Result<BoundName, CliError> {
    let normalized: String = s
        .chars()
        .filter(|c| *c != '_' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect();
    match normalized.as_str() {
        "trivial" => Ok(BoundName::Trivial),
        "typeii" => Ok(BoundName::TypeII),
        "typei" => Ok(BoundName::TypeI),
        "smoothpair" => Ok(BoundName::SmoothPair),
        "conjectural" => Ok(BoundName::Conjectural),
        "shifted" => Ok(BoundName::Shifted),
        "shiftedtrivial" => Ok(BoundName::ShiftedTrivial),
        "trilineara" => Ok(BoundName::TrilinearA),
        "trilinearb" => Ok(BoundName::TrilinearB),
        _ => Err(CliError::Usage(format!("unknown bound name `{s}`"))),
    }
}

fn parse_kind(s: &str) -> Result<CoefficientKind, CliError> {
    match s {
        "divisor" => Ok(CoefficientKind::Divisor),
        "tau" => Ok(CoefficientKind::TauNormalized),
        other => Err(CliError::Usage(format!(
            "--f takes divisor or tau, got `{other}`"
        ))),
    }
}

/// Exact rational in `p/q` or plain integer form.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| format!("bad rational `{s}`"))?;
    let d: BigInt = d.parse().map_err(|_| format!("bad rational `{s}`"))?;
    if d.is_zero() {
        return Err(format!("bad rational `{s}`: zero denominator"));
    }
    Ok(Rat::new(n, d))
}

/// `p/q` with the `/1` dropped for integers.
pub fn rat_str(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------

fn cmd_kloosterman(a: &KloostermanArgs) -> Result<(), CliError> {
    let q = PrimeModulus::new(a.q).map_err(usage)?;
    let t = kloosterman::table(q).map_err(usage)?;
    let mut csv = String::with_capacity(t.values().len() * 24);
    csv.push_str("a,kl\n");
    for (i, v) in t.values().iter().enumerate() {
        let _ = writeln!(csv, "{i},{v}");
    }
    match &a.dump {
        Some(path) => {
            fs::write(path, &csv)
                .map_err(|e| usage(format!("writing {}: {e}", path.display())))?;
            let (max_abs, argmax) = t.weil_extremum();
            println!(
                "q={} rows={} max|Kl|={max_abs:.6} at a={argmax} -> {}",
                a.q,
                t.values().len(),
                path.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_complete_scan(a: &CompleteScanArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let q = PrimeModulus::new(a.q).map_err(usage)?;
    if a.b == 0 {
        return Err(CliError::Usage("--B must be at least 1".into()));
    }
    if a.h.is_empty() {
        return Err(CliError::Usage("--h needs at least one twist".into()));
    }
    let rep = complete_sums::scan_complete_sums(q, a.b, &a.h).map_err(usage)?;
    emit(ctx, a.out.as_deref(), rep)
}

fn cmd_conjecture_scan(a: &ConjectureScanArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let q = PrimeModulus::new(a.q).map_err(usage)?;
    if a.b == 0 {
        return Err(CliError::Usage("--B must be at least 1".into()));
    }
    let rep = correlation::scan_conjecture(q, a.b, a.budget).map_err(usage)?;
    emit(ctx, a.out.as_deref(), rep)
}

fn cmd_bilinear(a: &BilinearArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let q = PrimeModulus::new(a.q).map_err(usage)?;
    if a.m == 0 || a.n == 0 {
        return Err(CliError::Usage("--M and --N must be at least 1".into()));
    }
    let alpha = parse_family(&a.alpha)?;
    let beta = parse_family(&a.beta)?;
    let bounds: Vec<BoundName> = a
        .bounds
        .iter()
        .map(|s| parse_bound(s))
        .collect::<Result<_, _>>()?;
    let reports =
        bilinear::ratio_experiment(q, a.a, alpha, beta, a.m, a.n, &bounds).map_err(usage)?;
    emit(
        ctx,
        a.out.as_deref(),
        json!({
            "q": a.q,
            "m": a.m,
            "n": a.n,
            "a": a.a,
            "alpha": a.alpha,
            "beta": a.beta,
            "bounds": reports,
        }),
    )
}

fn cmd_ortho(a: &OrthoArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let sigma = parse_parity(&a.sigma)?;
    PrimeModulus::new(a.q).map_err(usage)?;
    if a.limit == 0 {
        return Err(CliError::Usage("--limit must be at least 1".into()));
    }
    let mut max_dev = 0.0f64;
    let mut pairs = 0usize;
    for m in 1..=a.limit {
        if m % a.q == 0 {
            continue;
        }
        for n in 1..=a.limit {
            if n % a.q == 0 {
                continue;
            }
            let (lhs, rhs) = dirichlet::orthogonality_check(a.q, sigma, m, n).map_err(usage)?;
            max_dev = max_dev.max((lhs - Complex64::new(rhs, 0.0)).norm());
            pairs += 1;
        }
    }
    emit(
        ctx,
        None,
        json!({
            "q": a.q,
            "sigma": parity_str(sigma),
            "limit": a.limit,
            "pairs": pairs,
            "max_deviation": max_dev,
        }),
    )
}

fn cmd_m4(a: &M4Args, ctx: &RunCtx) -> Result<(), CliError> {
    let value = dirichlet::m4(a.q).map_err(usage)?;
    let lq = (a.q as f64).ln();
    let leading = lq.powi(4) / (2.0 * std::f64::consts::PI.powi(2));
    emit(
        ctx,
        a.out.as_deref(),
        json!({
            "q": a.q,
            "m4": value,
            "leading_term": leading,
            "ratio": value / leading,
        }),
    )
}

fn cmd_decomp_check(a: &DecompCheckArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let sigma = parse_parity(&a.sigma)?;
    PrimeModulus::new(a.q).map_err(usage)?;
    if a.q > 61 {
        return Err(CliError::Usage(format!(
            "q = {} is above the work bound 61",
            a.q
        )));
    }
    if !(1.0..=1.0e4).contains(&a.cutoff) {
        return Err(CliError::Usage("--cutoff must lie in [1, 10^4]".into()));
    }
    let r = dirichlet::moment_decomposition_check(a.q, sigma, a.cutoff).map_err(usage)?;
    emit(
        ctx,
        None,
        json!({
            "q": a.q,
            "sigma": parity_str(sigma),
            "cutoff": a.cutoff,
            "lhs": r.lhs,
            "rhs": r.rhs,
            "diff": r.diff,
            "tol": r.tol,
        }),
    )
}

fn cmd_voronoi(a: &VoronoiArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let f = parse_kind(&a.f)?;
    if !(1..=30).contains(&a.c) {
        return Err(CliError::Usage("--c must lie in 1..=30".into()));
    }
    if !(2.0..=1.0e4).contains(&a.x) {
        return Err(CliError::Usage("--X must lie in [2, 10^4]".into()));
    }
    let r = modforms::voronoi_check(f, a.a, a.c, a.x).map_err(usage)?;
    emit(
        ctx,
        None,
        json!({
            "f": a.f,
            "a": a.a,
            "c": a.c,
            "x": a.x,
            "lhs": [r.lhs.re, r.lhs.im],
            "rhs": [r.rhs.re, r.rhs.im],
            "main_term": r.main_term,
            "diff": r.diff,
            "dual_terms": r.dual_terms,
        }),
    )
}

fn cmd_tau(a: &TauArgs, ctx: &RunCtx) -> Result<(), CliError> {
    if a.n == 0 || a.n as usize > modforms::TAU_LIMIT {
        return Err(CliError::Usage(format!(
            "--n must lie in 1..={}",
            modforms::TAU_LIMIT
        )));
    }
    let table = modforms::tau_table(a.n as usize);
    let value = table[a.n as usize - 1];
    let normalized = value as f64 / (a.n as f64).powf(5.5);
    emit(
        ctx,
        None,
        json!({
            "n": a.n,
            "tau": value.to_string(),
            "normalized": normalized,
        }),
    )
}

fn cmd_mixed_moment(a: &MixedMomentArgs, ctx: &RunCtx) -> Result<(), CliError> {
    PrimeModulus::new(a.q).map_err(usage)?;
    if !(5..=61).contains(&a.q) {
        return Err(CliError::Usage("--q must lie in 5..=61".into()));
    }
    if a.cutoff < 1.0 {
        return Err(CliError::Usage("--cutoff must be at least 1".into()));
    }
    let r = modforms::mixed_moment(a.q, a.cutoff);
    emit(
        ctx,
        a.out.as_deref(),
        json!({
            "q": a.q,
            "cutoff": a.cutoff,
            "value": r.value,
            "main_term": r.main_term,
            "ratio": r.ratio,
        }),
    )
}

fn cmd_optimize(a: &OptimizeArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.program)
        .map_err(|e| usage(format!("{}: {e}", a.program.display())))?;
    let prog = exponent_opt::parse_program(&text)
        .map_err(|e| usage(format!("{}: {e}", a.program.display())))?;
    let expect = a
        .expect
        .as_deref()
        .map(parse_rat)
        .transpose()
        .map_err(CliError::Usage)?;
    match exponent_opt::maximize(&prog) {
        Ok(r) => {
            if !exponent_opt::verify_certificate(&prog, &r) {
                return Err(CliError::Assertion(
                    "optimizer certificate failed to verify".into(),
                ));
            }
            if let Some(want) = &expect {
                if r.value != *want {
                    return Err(CliError::Assertion(format!(
                        "optimum {} differs from expected {}",
                        rat_str(&r.value),
                        rat_str(want)
                    )));
                }
            }
            let argmax: BTreeMap<&str, String> = r
                .argmax
                .iter()
                .map(|(k, v)| (k.as_str(), rat_str(v)))
                .collect();
            emit(
                ctx,
                a.out.as_deref(),
                json!({
                    "value": rat_str(&r.value),
                    "argmax": argmax,
                    "region": r.region,
                    "leaves": r.leaves,
                    "fallback_touched": r.fallback_touched,
                }),
            )
        }
        Err(e) => {
            if expect.is_some() {
                return Err(CliError::Assertion(format!(
                    "program is {e}, expected an optimum"
                )));
            }
            emit(
                ctx,
                a.out.as_deref(),
                json!({ "value": null, "verdict": e.to_string() }),
            )
        }
    }
}

// ---------------------------------------------------------------------
// Oracle freezer
// ---------------------------------------------------------------------

fn cmd_oracle_freeze(a: &OracleFreezeArgs, ctx: &RunCtx) -> Result<(), CliError> {
    const KNOWN: [&str; 7] = ["r1", "c2", "c3", "c4", "c5", "m4", "mixed"];
    let mut wants: BTreeSet<&str> = BTreeSet::new();
    for s in &a.scope {
        if s == "all" {
            wants.extend(KNOWN);
        } else if let Some(k) = KNOWN.iter().find(|k| *k == s) {
            wants.insert(k);
        } else {
            return Err(CliError::Usage(format!(
                "unknown scope `{s}`; use all or any of {}",
                KNOWN.join(",")
            )));
        }
    }
    if wants.is_empty() {
        return Err(CliError::Usage("--scope selected nothing".into()));
    }

    let mut gf = if ctx.golden_path.exists() {
        GoldenFile::load(&ctx.golden_path).map_err(CliError::Usage)?
    } else {
        GoldenFile::default()
    };
    let date = utc_date();
    // KNOWN is ordered so the cheap oracles run first.
    for key in KNOWN {
        if !wants.contains(key) {
            continue;
        }
        let (name, constant) = freeze_one(key, &date)?;
        println!("  {name} = {}", constant.value);
        gf.constants.insert(name.to_string(), constant);
    }
    gf.version += 1;
    gf.save(&ctx.golden_path).map_err(CliError::Usage)?;
    println!("wrote {} (version {})", ctx.golden_path.display(), gf.version);
    Ok(())
}

fn freeze_one(key: &str, date: &str) -> Result<(&'static str, GoldenConstant), CliError> {
    let prime = |q: u64| PrimeModulus::new(q).expect("freeze moduli are prime");
    match key {
        "r1" => {
            let mut ratios = Vec::new();
            for q in [101u64, 211, 499] {
                let rep =
                    complete_sums::scan_complete_sums(prime(q), 2, &[0, 1, 50]).map_err(usage)?;
                ratios.push((q, rep.max_ratio));
            }
            Ok((
                GOLDEN_R1,
                GoldenConstant {
                    value: ratios[0].1,
                    oracle: "complete-scan --B 2 --h 0,1,50; frozen at q=101".into(),
                    date: date.into(),
                    q_range: format!(
                        "101,211,499; ratios {:.6}, {:.6}, {:.6}",
                        ratios[0].1, ratios[1].1, ratios[2].1
                    ),
                },
            ))
        }
        "c2" => {
            let mut rows = Vec::new();
            for q in [101u64, 199] {
                let rep =
                    correlation::scan_conjecture(prime(q), 2, 1 << 25).map_err(usage)?;
                rows.push((q, rep.max_ratio_offdiag, rep.max_ratio));
            }
            Ok((
                GOLDEN_C2,
                GoldenConstant {
                    value: rows[0].1,
                    oracle: "conjecture-scan --B 2 --budget 33554432; frozen off-diagonal ratio at q=101".into(),
                    date: date.into(),
                    q_range: format!(
                        "101,199; offdiag {:.6}, {:.6}; full {:.6}, {:.6}",
                        rows[0].1, rows[1].1, rows[0].2, rows[1].2
                    ),
                },
            ))
        }
        "c3" => {
            let reports = bilinear::ratio_experiment(
                prime(997),
                1,
                CoefficientFamily::Ones,
                CoefficientFamily::Ones,
                31,
                31,
                &[BoundName::TypeII],
            )
            .map_err(usage)?;
            Ok((
                GOLDEN_C3,
                GoldenConstant {
                    value: reports[0].ratio,
                    oracle: "bilinear --q 997 --M 31 --N 31 --alpha ones --beta ones --bounds typeII".into(),
                    date: date.into(),
                    q_range: "997".into(),
                },
            ))
        }
        "c4" => {
            let mut rows = Vec::new();
            for q in [101u64, 211] {
                let rep = bilinear::shifted_error_ratio(
                    CongruenceFamily::Divisor,
                    64,
                    64,
                    prime(q),
                    Sign::Plus,
                )
                .map_err(usage)?;
                rows.push((q, rep.ratio));
            }
            Ok((
                GOLDEN_C4,
                GoldenConstant {
                    value: rows[0].1,
                    oracle: "shifted congruence ratio, tau against divisor, M=N=64, sign +; frozen at q=101".into(),
                    date: date.into(),
                    q_range: format!("101,211; ratios {:.6}, {:.6}", rows[0].1, rows[1].1),
                },
            ))
        }
        "c5" => {
            let mut worst = 0.0f64;
            let mut rows = String::new();
            for q in [101u64, 211] {
                for sigma in Parity::BOTH {
                    let res = dirichlet::diagonal_main_term(
                        CoefficientKind::Divisor,
                        CoefficientKind::Divisor,
                        sigma,
                        q,
                    )
                    .map_err(usage)?;
                    let direct = dirichlet::diagonal_direct_sum(sigma, q);
                    let scaled =
                        (res - direct).abs() * (q as f64).sqrt() / (q as f64).ln().powi(4);
                    let _ = write!(rows, "q={q} sigma={} {:.3e}; ", parity_str(sigma), scaled);
                    worst = worst.max(scaled);
                }
            }
            Ok((
                GOLDEN_C5,
                GoldenConstant {
                    value: worst,
                    oracle: "diagonal residue vs direct divisor-square sum, scaled by sqrt(q)/log^4 q".into(),
                    date: date.into(),
                    q_range: format!("101,211 both parities; {}", rows.trim_end()),
                },
            ))
        }
        "m4" => {
            let value = dirichlet::m4(101).map_err(usage)?;
            Ok((
                GOLDEN_M4_101,
                GoldenConstant {
                    value,
                    oracle: "m4 --q 101".into(),
                    date: date.into(),
                    q_range: "101".into(),
                },
            ))
        }
        "mixed" => {
            let r = modforms::mixed_moment(31, 100.0);
            Ok((
                GOLDEN_MIXED_31,
                GoldenConstant {
                    value: r.value,
                    oracle: "mixed-moment --q 31 --cutoff 100".into(),
                    date: date.into(),
                    q_range: format!("31; main term {:.9}, ratio {:.6}", r.main_term, r.ratio),
                },
            ))
        }
        _ => unreachable!("scope names validated by the caller"),
    }
}

fn cmd_suite(a: &SuiteArgs, ctx: &RunCtx) -> Result<(), CliError> {
    let level = match a.level.as_str() {
        "quick" => Level::Quick,
        "full" => Level::Full,
        other => {
            return Err(CliError::Usage(format!(
                "--level takes quick or full, got `{other}`"
            )))
        }
    };
    let golden = GoldenFile::load(&ctx.golden_path)
        .map_err(|e| CliError::Usage(format!("{e}; run `expsum oracle-freeze` first")))?;
    let sctx = SuiteContext {
        programs_dir: a.programs.clone(),
        golden,
    };
    let outcomes = suite::run_all(&sctx, level);
    let mut failed = 0usize;
    for o in &outcomes {
        match &o.detail {
            Ok(d) => println!("pass  {:<40} {d} [{:.1}s]", o.name, o.seconds),
            Err(d) => {
                failed += 1;
                println!("FAIL  {:<40} {d} [{:.1}s]", o.name, o.seconds);
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Assertion(format!(
            "{failed} of {} checks failed",
            outcomes.len()
        )));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}

/// Date in UTC, from the days-to-civil conversion.
fn utc_date() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let z = (secs / 86400) as i64 + 719468;
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = (z - era * 146097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe as i64 + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02}")
}
