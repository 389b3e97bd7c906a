//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] from flags, an optional JSON
//! file (`--config`) and built-in defaults, in that order of precedence.
//! Results go to `--out` (or stdout); the resolved config is written next to
//! the output as `<out>.config.json`, or to the diagnostic stream when
//! printing to stdout. Diagnostics are single `level=... code=... msg=...`
//! lines.
//!
//! Random substreams: `orbit` uses stream 0 of `--seed`; `stats` uses
//! stream `ic_index * runs + run_index`.
//!
//! Exit codes: 0 success, 1 validation/IO/invariant error, 2 non-convergence.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::controllers::{simulate_orbit, ControllerKind, Monitor};
use crate::dynamics::{DisturbanceModel, Grid, MapSpec, Problem, RngStream};
use crate::error::{Error, Result};
use crate::experiments::{
    average_control_map, convergence_stats, linspace, logspace, noise_resolution_study,
    piece_count_changes, spearman, sweep_mu, sweep_xi,
};
use crate::io::{
    load_safety_function, write_file, write_orbit, write_safety_function, write_stats, write_sweep,
};
use crate::safety::{
    compute_safety_function, extract_safe_set, min_control_bound, piece_stats, MembershipRule,
    SafetyFunction, SolverOptions,
};
use crate::scalar::format_round_trip;
use crate::verify;

#[derive(Debug, Parser)]
#[command(
    name = "safeset",
    version,
    about = "Safety functions and safe-set control of noisy 1-D maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the safety function and write it as CSV.
    Safety(SafetyArgs),
    /// Threshold a safety function and report its pieces.
    Safeset(SafesetArgs),
    /// Simulate one orbit.
    Orbit(OrbitArgs),
    /// Descent-control convergence statistics over initial conditions.
    Stats(StatsArgs),
    /// Sweep the disturbance bound at fixed slope.
    SweepXi(SweepArgs),
    /// Sweep the tent slope at fixed disturbance bound.
    SweepMu(SweepArgs),
    /// Run the built-in oracle and invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Default, Args)]
struct ProblemArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Map family: tent | constant.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    /// Value of the constant map.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_hi: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    xi0: Option<f64>,
    /// Odd number of worst-case disturbance values.
    #[arg(long)]
    noise_m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Safe-set membership rule: grid | exact.
    #[arg(long)]
    membership: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SafetyArgs {
    #[command(flatten)]
    common: ProblemArgs,
    /// Comma-separated support counts; prints `m,u0,k` instead of the function.
    #[arg(long, value_delimiter = ',')]
    m_study: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct SafesetArgs {
    #[command(flatten)]
    common: ProblemArgs,
    /// Load the safety function instead of computing it.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Threshold; defaults to min U.
    #[arg(long)]
    u0: Option<f64>,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    #[command(flatten)]
    common: ProblemArgs,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// none | partial | descent
    #[arg(long)]
    controller: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ic: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    u0: Option<f64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    common: ProblemArgs,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    ic_n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ProblemArgs,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    /// Logarithmic spacing (default for sweep-xi).
    #[arg(long)]
    log: Option<bool>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Values accepted from a `--config` JSON file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    map: Option<String>,
    mu: Option<f64>,
    c: Option<f64>,
    q_lo: Option<f64>,
    q_hi: Option<f64>,
    grid_n: Option<usize>,
    xi0: Option<f64>,
    noise_m: Option<usize>,
    seed: Option<u64>,
    max_sweeps: Option<usize>,
    membership: Option<String>,
    controller: Option<String>,
    ic: Option<f64>,
    steps: Option<usize>,
    u0: Option<f64>,
    ic_n: Option<usize>,
    runs: Option<usize>,
    max_steps: Option<usize>,
    from: Option<f64>,
    to: Option<f64>,
    count: Option<usize>,
    log: Option<bool>,
}

/// Fully resolved configuration of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub map: String,
    pub mu: f64,
    pub c: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub grid_n: usize,
    pub xi0: f64,
    pub noise_m: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub membership: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_study: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
    pub log: bool,
}

impl RunConfig {
    pub fn problem(&self) -> Result<Problem<f64>> {
        let map = match self.map.as_str() {
            "tent" => MapSpec::tent(self.mu),
            "constant" => MapSpec::constant(self.c),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown map {other:?} (expected tent|constant)"
                )))
            }
        };
        Problem::new(
            Grid::new(self.q_lo, self.q_hi, self.grid_n)?,
            map,
            DisturbanceModel::new(self.xi0, self.noise_m)?,
        )
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            max_sweeps: self.max_sweeps,
            ..Default::default()
        }
    }

    pub fn rule(&self) -> Result<MembershipRule> {
        self.membership.parse()
    }
}

fn load_config_file(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn resolve_common(command: &str, a: &ProblemArgs, f: &ConfigFile) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        map: a
            .map
            .clone()
            .or(f.map.clone())
            .unwrap_or_else(|| "tent".into()),
        mu: a.mu.or(f.mu).unwrap_or(3.0),
        c: a.c.or(f.c).unwrap_or(0.0),
        q_lo: a.q_lo.or(f.q_lo).unwrap_or(0.0),
        q_hi: a.q_hi.or(f.q_hi).unwrap_or(1.0),
        grid_n: a.grid_n.or(f.grid_n).unwrap_or(1000),
        xi0: a.xi0.or(f.xi0).unwrap_or(0.05),
        noise_m: a.noise_m.or(f.noise_m).unwrap_or(101),
        seed: a.seed.or(f.seed).unwrap_or(0),
        max_sweeps: a
            .max_sweeps
            .or(f.max_sweeps)
            .unwrap_or(crate::safety::DEFAULT_MAX_SWEEPS),
        membership: a
            .membership
            .clone()
            .or(f.membership.clone())
            .unwrap_or_else(|| MembershipRule::default().name().into()),
        input: None,
        controller: None,
        ic: None,
        steps: None,
        u0: None,
        ic_n: None,
        runs: None,
        max_steps: None,
        sweep: None,
        m_study: None,
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn info(&mut self, code: &str, msg: &str) {
        let _ = writeln!(self.err, "level=info code={code} msg={msg:?}");
    }
}

fn io_error(path: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_string(),
        source,
    }
}

/// Writes results to `--out` (plus `<out>.config.json`) or to stdout.
fn emit(
    io: &mut Io<'_>,
    cfg: &RunConfig,
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let json = serde_json::to_string(cfg).expect("config serializes");
    match out {
        Some(path) => {
            write_file(path, |mut w| write(&mut w))?;
            let mut cfg_path = path.as_os_str().to_owned();
            cfg_path.push(".config.json");
            let cfg_path = PathBuf::from(cfg_path);
            std::fs::write(&cfg_path, format!("{json}\n")).map_err(|source| Error::Io {
                path: cfg_path.display().to_string(),
                source,
            })?;
        }
        None => {
            write(io.out).map_err(io_error("<stdout>"))?;
            io.info("config", &json);
        }
    }
    Ok(())
}

fn summary(io: &mut Io<'_>, pairs: &[(&str, String)]) -> Result<()> {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(io.err, "level=info code=summary {}", line.join(" ")).map_err(io_error("<stderr>"))
}

fn obtain_safety_function(cfg: &RunConfig) -> Result<SafetyFunction<f64>> {
    match &cfg.input {
        Some(path) => load_safety_function(path),
        None => compute_safety_function(&cfg.problem()?, cfg.solver()),
    }
}

/// Copies the loaded function's problem into the config so it reflects what was used.
fn adopt_problem(cfg: &mut RunConfig, sf: &SafetyFunction<f64>) {
    let p = sf.problem();
    cfg.map = p.map.name().into();
    match p.map {
        MapSpec::Tent { mu } => cfg.mu = mu,
        MapSpec::Constant { c } => cfg.c = c,
    }
    cfg.q_lo = p.grid.lower();
    cfg.q_hi = p.grid.upper();
    cfg.grid_n = p.grid.len();
    cfg.xi0 = p.disturbance.bound();
    cfg.noise_m = p.disturbance.support_count();
}

fn run_command(cmd: Command, io: &mut Io<'_>) -> Result<()> {
    match cmd {
        Command::Safety(a) => {
            let f = load_config_file(a.common.config.as_deref())?;
            let mut cfg = resolve_common("safety", &a.common, &f);
            cfg.m_study = a.m_study.clone();
            let problem = cfg.problem()?;
            if let Some(ms) = &cfg.m_study {
                let rows =
                    noise_resolution_study(&problem.grid, problem.map, cfg.xi0, ms, cfg.solver())?;
                return emit(io, &cfg, a.common.out.as_deref(), |w| {
                    writeln!(w, "m,u0,k")?;
                    for (m, u0, k) in &rows {
                        writeln!(w, "{m},{},{k}", format_round_trip(*u0))?;
                    }
                    Ok(())
                });
            }
            let sf = compute_safety_function(&problem, cfg.solver())?;
            emit(io, &cfg, a.common.out.as_deref(), |w| {
                write_safety_function(&sf, w)
            })?;
            summary(
                io,
                &[
                    ("u_min", format_round_trip(min_control_bound(&sf))),
                    ("k", sf.iterations().to_string()),
                ],
            )
        }
        Command::Safeset(a) => {
            let f = load_config_file(a.common.config.as_deref())?;
            let mut cfg = resolve_common("safeset", &a.common, &f);
            cfg.input = a.input.clone();
            cfg.u0 = a.u0.or(f.u0);
            let sf = obtain_safety_function(&cfg)?;
            adopt_problem(&mut cfg, &sf);
            let u0 = cfg.u0.unwrap_or_else(|| min_control_bound(&sf));
            cfg.u0 = Some(u0);
            let ss = extract_safe_set(&sf, u0, cfg.rule()?)?;
            let stats = piece_stats(&ss, sf.grid());
            let intervals = ss.intervals(sf.grid());
            emit(io, &cfg, a.common.out.as_deref(), |w| {
                writeln!(w, "u0={}", format_round_trip(u0))?;
                writeln!(w, "n_pieces={}", stats.piece_count)?;
                writeln!(
                    w,
                    "mean_gap={}",
                    stats.mean_gap.map(format_round_trip).unwrap_or_default()
                )?;
                writeln!(w, "piece,lo,hi,width")?;
                for (k, ((lo, hi), wd)) in intervals.iter().zip(&stats.widths).enumerate() {
                    writeln!(
                        w,
                        "{k},{},{},{}",
                        format_round_trip(*lo),
                        format_round_trip(*hi),
                        format_round_trip(*wd)
                    )?;
                }
                Ok(())
            })
        }
        Command::Orbit(a) => {
            let f = load_config_file(a.common.config.as_deref())?;
            let mut cfg = resolve_common("orbit", &a.common, &f);
            cfg.input = a.input.clone();
            cfg.controller = Some(
                a.controller
                    .clone()
                    .or(f.controller.clone())
                    .unwrap_or_else(|| "descent".into()),
            );
            cfg.ic = Some(a.ic.or(f.ic).unwrap_or(0.3));
            cfg.steps = Some(a.steps.or(f.steps).unwrap_or(100));
            cfg.u0 = a.u0.or(f.u0);
            let sf = obtain_safety_function(&cfg)?;
            adopt_problem(&mut cfg, &sf);
            let u0 = cfg.u0.unwrap_or_else(|| min_control_bound(&sf));
            cfg.u0 = Some(u0);
            let ss = extract_safe_set(&sf, u0, cfg.rule()?)?;
            let kind = match cfg.controller.as_deref() {
                Some("none") => ControllerKind::None,
                Some("partial") => ControllerKind::Partial(&ss),
                Some("descent") => ControllerKind::Descent(&sf),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown controller {other:?} (expected none|partial|descent)"
                    )))
                }
            };
            let mut rng = RngStream::new(cfg.seed, 0);
            let rec = simulate_orbit(
                &kind,
                sf.problem(),
                cfg.ic.unwrap(),
                cfg.steps.unwrap(),
                &mut rng,
                &Monitor::new(&sf, &ss),
            )?;
            emit(io, &cfg, a.common.out.as_deref(), |w| write_orbit(&rec, w))?;
            let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
            summary(
                io,
                &[
                    ("escaped_at", opt(rec.escaped_at)),
                    ("entered_safe_set_at", opt(rec.entered_safe_set_at)),
                    ("steps", rec.steps.len().to_string()),
                ],
            )
        }
        Command::Stats(a) => {
            let f = load_config_file(a.common.config.as_deref())?;
            let mut cfg = resolve_common("stats", &a.common, &f);
            cfg.input = a.input.clone();
            cfg.ic_n = Some(a.ic_n.or(f.ic_n).unwrap_or(1000));
            cfg.runs = Some(a.runs.or(f.runs).unwrap_or(1000));
            cfg.max_steps = Some(a.max_steps.or(f.max_steps).unwrap_or(100));
            let sf = obtain_safety_function(&cfg)?;
            adopt_problem(&mut cfg, &sf);
            let ss = extract_safe_set(&sf, min_control_bound(&sf), cfg.rule()?)?;
            let stats = convergence_stats(
                &sf,
                &ss,
                cfg.ic_n.unwrap(),
                cfg.runs.unwrap(),
                cfg.max_steps.unwrap(),
                cfg.seed,
            )?;
            emit(io, &cfg, a.common.out.as_deref(), |w| {
                write_stats(&stats, w)
            })?;
            let (controls, values): (Vec<f64>, Vec<f64>) = average_control_map(&stats)
                .into_iter()
                .map(|(q0, c)| (c, sf.value_near(q0)))
                .unzip();
            summary(
                io,
                &[
                    (
                        "global_max_iterations",
                        stats.global_max_iterations.to_string(),
                    ),
                    ("fraction_within_6", stats.fraction_within(6).to_string()),
                    (
                        "spearman_control_vs_U",
                        spearman(&controls, &values)
                            .map(|r| r.to_string())
                            .unwrap_or_default(),
                    ),
                ],
            )
        }
        Command::SweepXi(a) => run_sweep("sweep-xi", a, io),
        Command::SweepMu(a) => run_sweep("sweep-mu", a, io),
        Command::Verify(a) => {
            let cases = a.cases.unwrap_or(20);
            let seed = a.seed.unwrap_or(0);
            let report = verify::run_suite(cases, seed)?;
            for c in &report.checks {
                writeln!(
                    io.out,
                    "{} {} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
                .map_err(io_error("<stdout>"))?;
            }
            if report.passed() {
                Ok(())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name)
                    .collect();
                Err(Error::Invariant(format!(
                    "verify failed: {}",
                    failed.join(",")
                )))
            }
        }
    }
}

fn run_sweep(command: &str, a: SweepArgs, io: &mut Io<'_>) -> Result<()> {
    let f = load_config_file(a.common.config.as_deref())?;
    let mut cfg = resolve_common(command, &a.common, &f);
    let is_xi = command == "sweep-xi";
    let (from, to, count, log) = if is_xi {
        (0.005, 0.25, 50, true)
    } else {
        (2.0, 15.0, 131, false)
    };
    let range = SweepRange {
        from: a.from.or(f.from).unwrap_or(from),
        to: a.to.or(f.to).unwrap_or(to),
        count: a.count.or(f.count).unwrap_or(count),
        log: a.log.or(f.log).unwrap_or(log),
    };
    if range.count == 0
        || range.from.is_nan()
        || range.to.is_nan()
        || range.to < range.from
        || (range.log && range.from <= 0.0)
    {
        return Err(Error::InvalidConfig(format!(
            "invalid sweep range {range:?}"
        )));
    }
    let values = if range.log {
        logspace(range.from, range.to, range.count)
    } else {
        linspace(range.from, range.to, range.count)
    };
    cfg.sweep = Some(range);
    let problem = cfg.problem()?;
    let rule = cfg.rule()?;
    let rows = if is_xi {
        sweep_xi(
            problem.map,
            &values,
            &problem.grid,
            cfg.noise_m,
            cfg.solver(),
            rule,
        )?
    } else {
        sweep_mu(
            cfg.xi0,
            &values,
            &problem.grid,
            cfg.noise_m,
            cfg.solver(),
            rule,
        )?
    };
    for r in rows.iter().filter(|r| r.error.is_some()) {
        let msg = format!(
            "param={} {}",
            r.param,
            r.error.as_deref().unwrap_or_default()
        );
        let _ = writeln!(io.err, "level=warn code=non_convergence msg={msg:?}");
    }
    emit(io, &cfg, a.common.out.as_deref(), |w| write_sweep(&rows, w))?;
    let changes: Vec<String> = piece_count_changes(&rows)
        .iter()
        .map(|c| format!("{c:.4}"))
        .collect();
    summary(
        io,
        &[
            ("rows", rows.len().to_string()),
            ("piece_count_changes", changes.join(";")),
        ],
    )
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn cli_main<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "level=error code=usage msg={first:?}");
            return 1;
        }
    };
    let mut io = Io { out, err };
    match run_command(cli.command, &mut io) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(
                io.err,
                "level=error code={} msg={:?}",
                e.code(),
                e.to_string()
            );
            e.exit_code()
        }
    }
}
