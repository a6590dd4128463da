//! Command-line front end. Every analysis is a subcommand; every output
//! starts with a metadata record holding the canonical command that
//! regenerates it.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::equilibria::{bifurcation_events, default_x_max, find_fixed_points, write_events_csv, EquilibriumRecord};
use crate::error::Error;
use crate::integrate::{integrate, IntegratorConfig, Method, MAX_STEP};
use crate::io::Metadata;
use crate::metrics::{spectrum_scan, write_scan_csv, SeedPolicy};
use crate::model::{Damping, State3};
use crate::sections::{
    bifurcation_sweep, ensemble_section, write_sweep_csv, Coordinate, DirectionFilter, EnsembleConfig, SweepConfig,
};
use crate::walk::{density_check, log_lags, msd, speed_stats, DensityConfig};

/// Environment variable naming the directory for outputs written without
/// an explicit `--out`.
pub const OUT_DIR_ENV: &str = "THOMAS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "thomas", version, about = "Dynamics of the cyclically symmetric Thomas system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write `t,x,y,z`.
    Simulate(SimulateArgs),
    /// Equilibria on the diagonal with their spectra, as JSON.
    FixedPoints(FixedPointsArgs),
    /// Pitchfork, saddle-node and Hopf points, as CSV.
    Bifurcations(BifurcationsArgs),
    /// Lyapunov spectrum and Kaplan–Yorke dimension for one or many `b`.
    Lyapunov(LyapunovArgs),
    /// Poincaré section of an ensemble of orbits.
    Section(SectionArgs),
    /// Bifurcation diagram from section hits over a range of `b`.
    Sweep(SweepArgs),
    /// Undamped walk statistics or the density-conservation check.
    Walk(WalkArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Output file; `-` writes to stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel subcommands.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Continue,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Up,
    Down,
    Both,
}

impl From<DirectionArg> for DirectionFilter {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Up => DirectionFilter::Up,
            DirectionArg::Down => DirectionFilter::Down,
            DirectionArg::Both => DirectionFilter::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateArg {
    X,
    Y,
    Z,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.19, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 5000.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub step: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub transient: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-10)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct FixedPointsArgs {
    #[arg(long, default_value_t = 0.128, allow_negative_numbers = true)]
    pub b: f64,
    /// Search half-width; defaults to a bound past the last root.
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct BifurcationsArgs {
    /// Number of saddle-node and Hopf events of each kind.
    #[arg(long, default_value_t = 4)]
    pub n_max: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct LyapunovArgs {
    /// Single value of `b`; overrides the range.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    pub b_lo: f64,
    #[arg(long, default_value_t = 0.45, allow_negative_numbers = true)]
    pub b_hi: f64,
    #[arg(long, default_value_t = 44)]
    pub n_b: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Continue)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 20000.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1000.0, allow_negative_numbers = true)]
    pub transient: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub step: f64,
    #[arg(long, default_value_t = 10)]
    pub renorm_every: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SectionArgs {
    #[arg(long, default_value_t = 0.19, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 100)]
    pub n_init: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean of every coordinate of the initial conditions.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub mean: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub scale: f64,
    #[arg(long)]
    pub max_hits_per_init: Option<usize>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    #[arg(long, default_value_t = 1000.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    pub transient: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub step: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub b_lo: f64,
    #[arg(long, default_value_t = 0.45, allow_negative_numbers = true)]
    pub b_hi: f64,
    #[arg(long, default_value_t = 600)]
    pub n_b: usize,
    #[arg(long, default_value_t = 200)]
    pub hits_per_b: usize,
    #[arg(long, value_enum, default_value_t = CoordinateArg::X)]
    pub coordinate: CoordinateArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::Up)]
    pub direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Continue)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 5000.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 500.0, allow_negative_numbers = true)]
    pub transient: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub step: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct WalkArgs {
    /// Mean speed and mean-squared displacement of one undamped orbit (default).
    #[arg(long, conflicts_with = "density")]
    pub stats: bool,
    /// Cell-occupancy drift of a uniform cloud instead.
    #[arg(long)]
    pub density: bool,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 50000.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub transient: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub step: f64,
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub min_lag: f64,
    #[arg(long, default_value_t = 30)]
    pub n_lags: usize,
    #[arg(long, default_value_t = 10000)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
    #[arg(long, default_value_t = 1000.0, allow_negative_numbers = true)]
    pub density_t_end: f64,
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    pub density_step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Damping for the density run; 0 checks conservation, > 0 is a control.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: Output,
}

/// A failure reported to the user, with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError { code: 3, message: format!("i/o error: {e}") }
    }
}

fn flag_error(flag: &str, message: impl std::fmt::Display) -> CliError {
    CliError { code: 2, message: format!("invalid value for --{flag}: {message}") }
}

fn require(ok: bool, flag: &str, message: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(flag_error(flag, message))
    }
}

fn damping(flag: &str, b: f64) -> Result<Damping, CliError> {
    Damping::new(b).map_err(|_| flag_error(flag, format!("b must be finite and non-negative, got {b}")))
}

fn positive_damping(flag: &str, b: f64) -> Result<Damping, CliError> {
    require(b > 0.0 && b.is_finite(), flag, &format!("b must be positive here, got {b} (use `walk` for b = 0)"))?;
    damping(flag, b)
}

fn finite_state(x: f64, y: f64, z: f64) -> Result<State3, CliError> {
    for (flag, v) in [("x0", x), ("y0", y), ("z0", z)] {
        require(v.is_finite(), flag, "must be finite")?;
    }
    Ok(State3::new(x, y, z))
}

fn rk4_config(step: f64, t_end: f64, transient: f64) -> Result<IntegratorConfig, CliError> {
    require(step > 0.0 && step <= MAX_STEP, "step", &format!("must lie in (0, {MAX_STEP}], got {step}"))?;
    require(t_end > 0.0 && t_end.is_finite(), "t-end", &format!("must be positive, got {t_end}"))?;
    require(
        transient >= 0.0 && transient < t_end,
        "transient",
        &format!("must lie in [0, t-end), got {transient}"),
    )?;
    Ok(IntegratorConfig::rk4(step, t_end, transient))
}

/// `thomas <sub> --flag value ...` rebuilt from resolved arguments.
fn canonical_command(sub: &str, params: &Value) -> String {
    let mut parts = vec!["thomas".to_string(), sub.to_string()];
    if let Value::Object(map) = params {
        for (k, v) in map {
            let flag = format!("--{}", k.replace('_', "-"));
            match v {
                Value::Null | Value::Bool(false) => {}
                Value::Bool(true) => parts.push(flag),
                Value::String(s) => parts.extend([flag, s.clone()]),
                other => parts.extend([flag, other.to_string()]),
            }
        }
    }
    parts.join(" ")
}

fn metadata<T: Serialize>(sub: &str, args: &T) -> Metadata {
    let params = serde_json::to_value(args).unwrap_or(Value::Null);
    let seed = params.get("seed").and_then(Value::as_u64);
    Metadata::new(canonical_command(sub, &params), params, seed)
}

fn csv_with_meta(meta: &Metadata, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    meta.write_csv_line(&mut buf)?;
    body(&mut buf)?;
    Ok(buf)
}

fn json_with_meta(meta: &Metadata, body: Value) -> Result<Vec<u8>, CliError> {
    let mut doc = json!({ "meta": meta });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn emit(output: &Output, default_name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = match &output.out {
        Some(p) if p.as_os_str() == "-" => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            return Ok(out.flush()?);
        }
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(default_name),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, bytes)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let d = damping("b", a.b)?;
    let s0 = finite_state(a.x0, a.y0, a.z0)?;
    let mut cfg = rk4_config(a.step, a.t_end, a.transient)?;
    require(a.record_every >= 1, "record-every", "must be at least 1")?;
    cfg.record_every = a.record_every;
    if let MethodArg::Rk45 = a.method {
        require(a.abs_tol > 0.0, "abs-tol", "must be positive")?;
        require(a.rel_tol > 0.0, "rel-tol", "must be positive")?;
        cfg = IntegratorConfig { method: Method::Rk45Adaptive, abs_tol: a.abs_tol, rel_tol: a.rel_tol, ..cfg };
    }
    let traj = integrate(&s0, d, &cfg)?;
    let bytes = csv_with_meta(&metadata("simulate", a), |w| traj.write_csv(w))?;
    emit(&a.output, "trajectory.csv", &bytes)
}

fn fixed_points(a: &FixedPointsArgs) -> Result<(), CliError> {
    let d = positive_damping("b", a.b)?;
    let x_max = a.x_max.unwrap_or_else(|| default_x_max(d));
    require(x_max.is_finite() && x_max >= std::f64::consts::PI, "x-max", "must be finite and at least pi")?;
    let eqs = find_fixed_points(d, x_max)?;
    let records: Vec<EquilibriumRecord> = eqs.iter().map(EquilibriumRecord::from).collect();
    let bytes = json_with_meta(&metadata("fixed-points", a), json!({ "b": a.b, "x_max": x_max, "equilibria": records }))?;
    emit(&a.output, "fixed_points.json", &bytes)
}

fn bifurcations(a: &BifurcationsArgs) -> Result<(), CliError> {
    require(a.n_max >= 1, "n-max", "must be at least 1")?;
    let events = bifurcation_events(a.n_max);
    let bytes = csv_with_meta(&metadata("bifurcations", a), |w| write_events_csv(&events, w))?;
    emit(&a.output, "bifurcations.csv", &bytes)
}

/// `n` values from `hi` down to `lo`.
fn descending_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { lo } else { hi - i as f64 * step }).collect()
}

fn lyapunov(a: &LyapunovArgs) -> Result<(), CliError> {
    let b_values = match a.b {
        Some(b) => {
            positive_damping("b", b)?;
            vec![b]
        }
        None => {
            require(a.b_lo > 0.0, "b-lo", "must be positive")?;
            require(a.b_hi > a.b_lo && a.b_hi.is_finite(), "b-hi", "must be finite and exceed --b-lo")?;
            require(a.n_b >= 2, "n-b", "must be at least 2")?;
            descending_grid(a.b_lo, a.b_hi, a.n_b)
        }
    };
    let s0 = finite_state(a.x0, a.y0, a.z0)?;
    let cfg = rk4_config(a.step, a.t_end, a.transient)?;
    require(a.renorm_every >= 1, "renorm-every", "must be at least 1")?;
    let policy = match a.policy {
        PolicyArg::Continue => SeedPolicy::Continue(s0),
        PolicyArg::Fixed => SeedPolicy::Fixed(s0),
    };
    let rows = spectrum_scan(&b_values, &cfg, a.renorm_every, policy);
    if let [row] = rows.as_slice() {
        if let Err(e) = &row.outcome {
            return Err(e.clone().into());
        }
    }
    let bytes = csv_with_meta(&metadata("lyapunov", a), |w| write_scan_csv(&rows, w))?;
    emit(&a.output, "lyapunov.csv", &bytes)
}

fn section(a: &SectionArgs) -> Result<(), CliError> {
    let d = positive_damping("b", a.b)?;
    require(a.n_init >= 1, "n-init", "must be at least 1")?;
    require(a.mean.is_finite(), "mean", "must be finite")?;
    require(a.scale >= 0.0 && a.scale.is_finite(), "scale", "must be finite and non-negative")?;
    let cfg = rk4_config(a.step, a.t_end, a.transient)?;
    let ens = EnsembleConfig {
        n_init: a.n_init,
        seed: a.seed,
        mean: State3::diagonal(a.mean),
        scale: a.scale,
        max_hits_per_init: a.max_hits_per_init,
    };
    let result = ensemble_section(&ens, d, &cfg, a.direction.into())?;
    let bytes = csv_with_meta(&metadata("section", a), |w| {
        result.write_csv(w)?;
        writeln!(w, "# failures={}", result.failures)
    })?;
    emit(&a.output, "section.csv", &bytes)
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    require(a.b_lo > 0.0, "b-lo", "must be positive")?;
    require(a.b_hi > a.b_lo && a.b_hi.is_finite(), "b-hi", "must be finite and exceed --b-lo")?;
    require(a.n_b >= 2, "n-b", "must be at least 2")?;
    require(a.hits_per_b >= 1, "hits-per-b", "must be at least 1")?;
    let s0 = finite_state(a.x0, a.y0, a.z0)?;
    let cfg = rk4_config(a.step, a.t_end, a.transient)?;
    let sweep = SweepConfig {
        b_lo: a.b_lo,
        b_hi: a.b_hi,
        n_b: a.n_b,
        coordinate: match a.coordinate {
            CoordinateArg::X => Coordinate::X,
            CoordinateArg::Y => Coordinate::Y,
            CoordinateArg::Z => Coordinate::Z,
        },
        hits_per_b: a.hits_per_b,
        direction: a.direction.into(),
        policy: match a.policy {
            PolicyArg::Continue => SeedPolicy::Continue(s0),
            PolicyArg::Fixed => SeedPolicy::Fixed(s0),
        },
    };
    let rows = bifurcation_sweep(&sweep, &cfg)?;
    let bytes = csv_with_meta(&metadata("sweep", a), |w| write_sweep_csv(&rows, w))?;
    emit(&a.output, "sweep.csv", &bytes)
}

fn walk(a: &WalkArgs) -> Result<(), CliError> {
    if a.density {
        damping("b", a.b)?;
        require(a.n >= 1, "n", "must be at least 1")?;
        require(a.cells >= 1, "cells", "must be at least 1")?;
        require(a.density_t_end >= 0.0 && a.density_t_end.is_finite(), "density-t-end", "must be non-negative")?;
        require(a.density_step > 0.0 && a.density_step <= MAX_STEP, "density-step", "must lie in (0, 0.1]")?;
        let report = density_check(&DensityConfig {
            n: a.n,
            cells_per_axis: a.cells,
            t_end: a.density_t_end,
            step_h: a.density_step,
            seed: a.seed,
            b: a.b,
        })?;
        let body = serde_json::to_value(&report).map_err(io::Error::other)?;
        let bytes = json_with_meta(&metadata("walk", a), body)?;
        return emit(&a.output, "density.json", &bytes);
    }
    require(a.b == 0.0, "b", "applies to --density only; the walk is undamped")?;
    let s0 = finite_state(a.x0, a.y0, a.z0)?;
    let mut cfg = rk4_config(a.step, a.t_end, a.transient)?;
    require(a.record_every >= 1, "record-every", "must be at least 1")?;
    cfg.record_every = a.record_every;
    require(a.n_lags >= 2, "n-lags", "must be at least 2")?;
    let max_lag = (a.t_end - a.transient) / 4.0;
    require(a.min_lag > 0.0 && a.min_lag < max_lag, "min-lag", "must be positive and below a quarter of the run")?;
    let traj = integrate(&s0, Damping::new(0.0)?, &cfg)?;
    let lags = log_lags(a.min_lag, max_lag, a.n_lags);
    let speed = speed_stats(&traj)?;
    let stats = msd(&traj, &lags)?;
    let body = json!({
        "mean_speed": stats.mean_speed,
        "mean_norm": stats.mean_norm,
        "sin2_means": speed.sin2_means,
        "max_speed": speed.max_speed,
        "duration": speed.duration,
        "diffusion_estimate": stats.diffusion_estimate,
        "msd": stats.msd,
    });
    let bytes = json_with_meta(&metadata("walk", a), body)?;
    emit(&a.output, "walk.json", &bytes)
}

fn threads(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Simulate(a) => a.output.threads,
        Command::FixedPoints(a) => a.output.threads,
        Command::Bifurcations(a) => a.output.threads,
        Command::Lyapunov(a) => a.output.threads,
        Command::Section(a) => a.output.threads,
        Command::Sweep(a) => a.output.threads,
        Command::Walk(a) => a.output.threads,
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let run = || match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::FixedPoints(a) => fixed_points(a),
        Command::Bifurcations(a) => bifurcations(a),
        Command::Lyapunov(a) => lyapunov(a),
        Command::Section(a) => section(a),
        Command::Sweep(a) => sweep(a),
        Command::Walk(a) => walk(a),
    };
    match threads(&cli.command) {
        Some(0) => Err(flag_error("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| flag_error("threads", e))?
            .install(run),
        None => run(),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
