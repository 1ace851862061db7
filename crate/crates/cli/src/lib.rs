//! Command-line front end: `check`, `solve`, `sweep` and `oracle`.
//!
//! Exit codes: 0 ok, 2 not converged, 3 nonconforming nonlinearity,
//! 4 hypothesis fails, 5 inconclusive, 6 sweep verdict fails, 64 usage error,
//! 1 anything else (I/O).

pub mod config;
pub mod expr;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use normsol::grid::{make_grid, RadialGrid};
use normsol::nonlinearity::{
    builtin, check_conditions, consistency_sample, Hypothesis, Nonlinearity, NonlinearitySpec,
    Verdict,
};
use normsol::optimizer::{multistart, SolveReport};
use normsol::oracles::OracleTable;
use normsol::sweep::{expected_verdicts, sparkline, sweep, SweepOptions, SweepResult};
use serde::Serialize;
use toml::Value;

use config::{parse_assignment, RunConfig};
use expr::Expr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NONCONFORMANCE: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;
pub const EXIT_VERDICT: i32 = 6;
pub const EXIT_USAGE: i32 = 64;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    fn new(code: i32, error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code,
            error: error.into(),
        }
    }

    fn usage(error: impl Into<anyhow::Error>) -> Failure {
        Failure::new(EXIT_USAGE, error)
    }
}

impl From<normsol::Error> for Failure {
    fn from(e: normsol::Error) -> Failure {
        use normsol::Error::*;
        let code = match &e {
            Config(_) | Parse(_) | Domain(_) => EXIT_USAGE,
            Nonconformance { .. } => EXIT_NONCONFORMANCE,
            NonFinite { .. } | Insufficient(_) => EXIT_NOT_CONVERGED,
            Io(_) | Csv(_) => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::new(EXIT_FAILURE, e)
    }
}

type Outcome = Result<i32, Failure>;

#[derive(Debug, Parser)]
#[command(name = "normsol", version, about = "Normalized ground states of radial nonlinear Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify the structural hypotheses on f.
    Check(Common),
    /// Compute the ground state at one mass.
    Solve(Common),
    /// Ground-state energies over a range of masses, with verdicts.
    Sweep(SweepArgs),
    /// Reference values from closed forms.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long)]
    mass: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Expression for f(t).
    #[arg(long = "f", value_name = "EXPR")]
    f: Option<String>,
    /// Expression for the primitive F(t).
    #[arg(long = "F", value_name = "EXPR")]
    primitive: Option<String>,
    /// Nonlinearity parameter, NAME=VALUE.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    stretch: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Any configuration key, KEY=VALUE with a dotted key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated masses.
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
    #[arg(long)]
    mass_min: Option<f64>,
    #[arg(long)]
    mass_max: Option<f64>,
    #[arg(long)]
    mass_count: Option<usize>,
    /// Reverse the computed energies before assessing (verdict testing).
    #[arg(long, hide = true)]
    perturb_energies: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// soliton, bubble or gn.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check(c) => {
            let cfg = resolve(&c, Vec::new())?;
            cmd_check(&cfg)
        }
        Command::Solve(c) => {
            let mut extra = Vec::new();
            push(&mut extra, "solve.mass", c.mass.map(Value::Float));
            let cfg = resolve(&c, extra)?;
            cmd_solve(&cfg)
        }
        Command::Sweep(a) => {
            let mut extra = Vec::new();
            if let Some(ms) = &a.masses {
                extra.push((
                    "sweep.masses".to_string(),
                    Value::Array(ms.iter().map(|&m| Value::Float(m)).collect()),
                ));
            }
            push(&mut extra, "sweep.min", a.mass_min.map(Value::Float));
            push(&mut extra, "sweep.max", a.mass_max.map(Value::Float));
            push(&mut extra, "sweep.count", a.mass_count.map(|n| Value::Integer(n as i64)));
            if a.common.mass.is_some() {
                return Err(Failure::usage(anyhow::anyhow!(
                    "sweep takes --masses or --mass-min/--mass-max, not --mass"
                )));
            }
            let cfg = resolve(&a.common, extra)?;
            cmd_sweep(&cfg, a.perturb_energies)
        }
        Command::Oracle(a) => {
            let mut extra = Vec::new();
            push(&mut extra, "oracle.case", a.case.clone().map(Value::String));
            push(&mut extra, "oracle.p", a.p.map(Value::Float));
            push(&mut extra, "oracle.mu", a.mu.map(Value::Float));
            push(&mut extra, "oracle.eps", a.eps.map(Value::Float));
            push(&mut extra, "oracle.mass", a.common.mass.map(Value::Float));
            let cfg = resolve(&a.common, extra)?;
            cmd_oracle(&cfg)
        }
    }
}

fn push(list: &mut Vec<(String, Value)>, key: &str, value: Option<Value>) {
    if let Some(v) = value {
        list.push((key.to_string(), v));
    }
}

/// Config file, then `--set`, then the dedicated flags.
fn resolve(c: &Common, extra: Vec<(String, Value)>) -> Result<RunConfig, Failure> {
    let mut overrides = Vec::new();
    for s in &c.set {
        overrides.push(parse_assignment(s).map_err(Failure::usage)?);
    }
    push(&mut overrides, "problem.dim", c.dim.map(|n| Value::Integer(n as i64)));
    push(&mut overrides, "problem.builtin", c.builtin.clone().map(Value::String));
    push(&mut overrides, "problem.f", c.f.clone().map(Value::String));
    push(&mut overrides, "problem.F", c.primitive.clone().map(Value::String));
    for p in &c.params {
        let (k, v) = parse_assignment(p).map_err(Failure::usage)?;
        overrides.push((format!("problem.params.{k}"), v));
    }
    push(&mut overrides, "output.dir", c.out.as_ref().map(|p| Value::String(p.display().to_string())));
    push(&mut overrides, "seed", c.seed.map(|s| Value::Integer(s as i64)));
    push(&mut overrides, "threads", c.threads.map(|n| Value::Integer(n as i64)));
    push(&mut overrides, "grid.radius", c.radius.map(Value::Float));
    push(&mut overrides, "grid.nodes", c.nodes.map(|n| Value::Integer(n as i64)));
    push(&mut overrides, "grid.stretch", c.stretch.map(Value::Float));
    push(&mut overrides, "solve.restarts", c.restarts.map(|n| Value::Integer(n as i64)));
    overrides.extend(extra);
    let cfg = RunConfig::load(c.config.as_deref(), &overrides).map_err(Failure::usage)?;
    if let Some(n) = cfg.threads {
        // a second configuration in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(cfg)
}

/// `f` and `F` given as expressions.
#[derive(Debug)]
struct UserNonlinearity {
    f: Expr,
    primitive: Expr,
}

impl Nonlinearity for UserNonlinearity {
    fn f(&self, t: f64) -> f64 {
        self.f.eval(t)
    }

    fn primitive(&self, t: f64) -> f64 {
        self.primitive.eval(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
}

/// The configured nonlinearity. User expressions are parsed, their primitive
/// is checked against quadrature of `f`, and they carry the claimed tags.
pub fn nonlinearity(cfg: &RunConfig) -> Result<NonlinearitySpec, Failure> {
    let p = &cfg.problem;
    match (&p.builtin, &p.f, &p.primitive) {
        (Some(name), None, None) => {
            if p.claims.is_some() {
                return Err(Failure::usage(anyhow::anyhow!(
                    "problem.claims applies to user expressions only"
                )));
            }
            Ok(builtin(name, p.dim, &p.params)?)
        }
        (None, Some(f), Some(big_f)) => {
            let parse = |src: &str, which: &str| {
                Expr::parse(src, &p.params)
                    .map_err(|e| Failure::usage(anyhow::anyhow!("expression for {which}: {e}")))
            };
            let kernel = UserNonlinearity {
                f: parse(f, "f")?,
                primitive: parse(big_f, "F")?,
            };
            let claimed = match &p.claims {
                None => Hypothesis::FIBER.to_vec(),
                Some(tags) => tags
                    .iter()
                    .map(|t| {
                        Hypothesis::from_tag(t).ok_or_else(|| {
                            Failure::usage(anyhow::anyhow!("unknown hypothesis tag `{t}`"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            };
            if p.dim == 0 {
                return Err(Failure::usage(anyhow::anyhow!("dimension must be at least 1")));
            }
            let nl = NonlinearitySpec::new("user", Arc::new(kernel), claimed, p.params.clone());
            let at_zero = nl.primitive(0.0);
            if at_zero != 0.0 {
                return Err(Failure::new(
                    EXIT_NONCONFORMANCE,
                    anyhow::anyhow!("F(0) = {at_zero}, expected 0"),
                ));
            }
            if let Some((t, exact, integral)) = nl.primitive_mismatch(&consistency_sample(), 1e-8) {
                return Err(Failure::new(
                    EXIT_NONCONFORMANCE,
                    anyhow::anyhow!(
                        "F is not a primitive of f: F({t:e}) = {exact:e} but the integral of f is {integral:e}"
                    ),
                ));
            }
            Ok(nl)
        }
        (None, None, None) => Err(Failure::usage(anyhow::anyhow!(
            "no nonlinearity (use --builtin or --f with --F)"
        ))),
        _ => Err(Failure::usage(anyhow::anyhow!(
            "give either a builtin or both f and F expressions"
        ))),
    }
}

/// User expressions must pass (f0)-(f4) before any solve.
fn certify_user(cfg: &RunConfig, nl: &NonlinearitySpec) -> Result<(), Failure> {
    if cfg.problem.builtin.is_some() {
        return Ok(());
    }
    let report = check_conditions(nl, cfg.problem.dim, cfg.check);
    if report.combined(&Hypothesis::FIBER) == Verdict::Fail {
        let failing: Vec<String> = report
            .failing()
            .into_iter()
            .filter(|h| Hypothesis::FIBER.contains(h))
            .map(|h| h.to_string())
            .collect();
        return Err(Failure::new(
            EXIT_NONCONFORMANCE,
            anyhow::anyhow!("user nonlinearity fails {}", failing.join(", ")),
        ));
    }
    Ok(())
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    cfg.write_resolved(&dir)
        .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>, Failure> {
    let g = &cfg.grid;
    Ok(make_grid(cfg.problem.dim, g.radius, g.nodes, g.stretch)?)
}

pub fn cmd_check(cfg: &RunConfig) -> Outcome {
    let nl = nonlinearity(cfg)?;
    let dir = output_dir(cfg)?;
    let report = check_conditions(&nl, cfg.problem.dim, cfg.check);
    write_json(&dir.join("check.json"), &report)?;
    for (h, entry) in &report.hypotheses {
        let v = match entry.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "inconclusive",
        };
        println!("{:<4} {v:<13} {}", h.to_string(), entry.method);
    }
    // the fiber hypotheses and (f5) always count, the rest only when claimed
    let mut counted: Vec<Hypothesis> = Hypothesis::FIBER.to_vec();
    counted.push(Hypothesis::F5);
    counted.extend(nl.claimed().iter().copied());
    Ok(match report.combined(&counted) {
        Verdict::Pass => EXIT_OK,
        Verdict::Fail => EXIT_HYPOTHESIS,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> Outcome {
    let opts = cfg.solve_options().map_err(Failure::usage)?;
    let nl = nonlinearity(cfg)?;
    certify_user(cfg, &nl)?;
    let grid = grid(cfg)?;
    let dir = output_dir(cfg)?;
    let report = multistart(&grid, &nl, &opts)?;
    write_solve_outputs(&dir, &report)?;
    println!(
        "E = {:.10e}  mu = {:.10e}  iterations = {}  converged = {}",
        report.energy, report.multiplier, report.iterations, report.converged
    );
    println!(
        "pde residual = {:.3e}  |P| = {:.3e}  boundary tail = {:.3e}",
        report.pde_residual, report.pohozaev_residual, report.boundary_tail
    );
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn write_solve_outputs(dir: &Path, report: &SolveReport) -> Result<(), Failure> {
    write_json(&dir.join("report.json"), report)?;
    let file = BufWriter::new(File::create(dir.join("profile.csv"))?);
    report.profile().write_csv(file)?;
    let mut w = csv::Writer::from_path(dir.join("trace.csv"))
        .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    let io = |e: csv::Error| Failure::new(EXIT_FAILURE, e);
    w.write_record(["iteration", "J", "grad_norm", "step"]).map_err(io)?;
    for t in &report.trace {
        w.write_record([
            t.iteration.to_string(),
            format!("{:e}", t.value),
            format!("{:e}", t.grad_norm),
            format!("{:e}", t.step),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PointSummary {
    mass: f64,
    energy: Option<f64>,
    multiplier: Option<f64>,
    converged: bool,
    iterations: Option<usize>,
    pde_residual: Option<f64>,
    pohozaev_residual: Option<f64>,
    boundary_tail: Option<f64>,
    warm_cold_gap: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    nonlinearity: &'a str,
    dim: usize,
    masses: &'a [f64],
    energies: Vec<Option<f64>>,
    multipliers: Vec<Option<f64>>,
    verdicts: &'a normsol::sweep::Verdicts,
    claimed: Vec<&'static str>,
    failed: Vec<String>,
    perturbed: bool,
    points: Vec<PointSummary>,
}

pub fn cmd_sweep(cfg: &RunConfig, perturb: bool) -> Outcome {
    let masses = cfg.sweep_masses().map_err(Failure::usage)?;
    let mut base = cfg.clone();
    base.solve.mass.get_or_insert(masses[0]);
    let opts = base.solve_options().map_err(Failure::usage)?;
    let nl = nonlinearity(cfg)?;
    certify_user(cfg, &nl)?;
    let grid = grid(cfg)?;
    let dir = output_dir(cfg)?;
    let sweep_opts = SweepOptions {
        ascending: cfg.sweep.ascending,
        cold_check: cfg.sweep.cold_check,
    };
    let mut result = sweep(&grid, &nl, &masses, &opts, &sweep_opts)?;
    if perturb {
        perturb_energies(&mut result);
    }
    let claimed = expected_verdicts(&nl, cfg.problem.dim, &masses);
    let failed = result.verdicts.failures(&claimed);

    let file = BufWriter::new(File::create(dir.join("sweep.csv"))?);
    result.write_csv(file)?;
    let finite = |x: f64| x.is_finite().then_some(x);
    let summary = SweepSummary {
        nonlinearity: nl.name(),
        dim: cfg.problem.dim,
        masses: &result.masses,
        energies: result.energies.iter().map(|&e| finite(e)).collect(),
        multipliers: result.multipliers.iter().map(|&e| finite(e)).collect(),
        verdicts: &result.verdicts,
        claimed: claimed.clone(),
        failed: failed.clone(),
        perturbed: perturb,
        points: result
            .points
            .iter()
            .map(|p| {
                let r = p.report.as_ref();
                PointSummary {
                    mass: p.mass,
                    energy: r.map(|r| r.energy),
                    multiplier: r.map(|r| r.multiplier),
                    converged: p.ok(),
                    iterations: r.map(|r| r.iterations),
                    pde_residual: r.map(|r| r.pde_residual),
                    pohozaev_residual: r.map(|r| r.pohozaev_residual),
                    boundary_tail: r.map(|r| r.boundary_tail),
                    warm_cold_gap: p.warm_cold_gap,
                    error: p.error.clone(),
                }
            })
            .collect(),
    };
    write_json(&dir.join("sweep.json"), &summary)?;

    println!("E_m  {}", sparkline(&result.energies));
    for (m, e) in result.masses.iter().zip(&result.energies) {
        println!("  m = {m:<12.6e} E = {e:.10e}");
    }
    for name in &claimed {
        let status = if failed.iter().any(|f| f == name) { "FAIL" } else { "ok" };
        println!("verdict {name:<20} {status}");
    }
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}

/// Reverses the energies so that a decreasing curve becomes increasing.
fn perturb_energies(result: &mut SweepResult) {
    result.energies.reverse();
    result.reassess();
}

pub fn cmd_oracle(cfg: &RunConfig) -> Outcome {
    let o = &cfg.oracle;
    let table = match o.case.as_str() {
        "soliton" => {
            if cfg.problem.dim != 1 {
                return Err(Failure::usage(anyhow::anyhow!("the soliton oracle is one-dimensional")));
            }
            let p = o
                .p
                .or_else(|| cfg.problem.params.get("p").copied())
                .unwrap_or(8.0);
            OracleTable::soliton(p, o.mass, o.mu)?
        }
        "bubble" => OracleTable::bubble(cfg.problem.dim, o.mass, o.eps)?,
        "gn" => {
            let p = o
                .p
                .or_else(|| cfg.problem.params.get("p").copied())
                .ok_or_else(|| Failure::usage(anyhow::anyhow!("the gn oracle needs p")))?;
            OracleTable::gn(cfg.problem.dim, p, o.resolution)?
        }
        other => {
            return Err(Failure::usage(anyhow::anyhow!(
                "unknown oracle case `{other}` (expected soliton, bubble or gn)"
            )))
        }
    };
    let dir = output_dir(cfg)?;
    write_json(&dir.join("oracle.json"), &table)?;
    let mut rows: BTreeMap<&str, String> = BTreeMap::new();
    for (k, v) in &table.values {
        rows.insert(k, format!("{:.12e} ± {:.1e}", v.value, v.error));
    }
    for (k, v) in rows {
        println!("{k:<30} {v}");
    }
    Ok(EXIT_OK)
}
