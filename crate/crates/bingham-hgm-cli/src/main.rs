//! Command-line front end: constant evaluation, fitting, approximation,
//! verification runs and table reproduction.
//!
//! Exit codes: 0 success, 2 input validation, 3 numerical failure. Errors go
//! to stderr as a single machine-readable JSON line.

mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use bingham_hgm::*;

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "bingham-hgm",
    about = "Bingham normalizing constants and maximum likelihood via the holonomic gradient method",
    version
)]
struct Cli {
    /// Emit a JSON report instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalizing constant C(theta) by the chosen method.
    Const(ConstArgs),
    /// Derivative vector, expectation parameter and log-constant.
    Grad(GradArgs),
    /// Maximum-likelihood fit from data rows or sufficient statistics.
    Fit(FitArgs),
    /// First-order saddle-point approximation.
    Spa(SpaArgs),
    /// Complex-Bingham closed form.
    Cbingham(CbArgs),
    /// Cross-check the evaluation methods against each other.
    Verify(VerifyArgs),
    /// Recompute the published reference tables.
    Table(TableArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Hg,
    Series,
    Mc,
    Contour,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Hg => "hg",
            Method::Series => "series",
            Method::Mc => "mc",
            Method::Contour => "contour",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scale {
    Normalized,
    Raw,
    Log,
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Normalized => "normalized",
            Scale::Raw => "raw",
            Scale::Log => "log",
        }
    }
}

#[derive(Args)]
struct ScaleFlags {
    /// Report C(theta)/C(0) (the default).
    #[arg(long, conflicts_with_all = ["raw", "log"])]
    normalized: bool,
    /// Report the raw constant C(theta).
    #[arg(long, conflicts_with = "log")]
    raw: bool,
    /// Report ln C(theta) (raw scale, for extreme parameters).
    #[arg(long)]
    log: bool,
}

impl ScaleFlags {
    fn scale(&self) -> Scale {
        if self.raw {
            Scale::Raw
        } else if self.log {
            Scale::Log
        } else {
            Scale::Normalized
        }
    }
}

#[derive(Args)]
struct OdeFlags {
    /// Relative tolerance of the ODE propagation.
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Absolute tolerance of the ODE propagation.
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
}

impl OdeFlags {
    fn ctl(&self) -> OdeControl {
        OdeControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..Default::default()
        }
    }
}


fn parse_vector(text: &str, what: &str) -> CliResult<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = text
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect();
    vals.map_err(|e| input_error(format!("bad {what} entry: {e}")))
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_nan() || !(1.0..=1e12).contains(&v) {
        return Err(format!("sample count {s} out of range"));
    }
    Ok(v.round() as usize)
}

#[derive(Args)]
struct ConstArgs {
    /// Parameter vector, comma separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "input_json")]
    theta: Option<String>,
    /// JSON job file: {"theta": [...], "eps": ..., "method": ...}, a previous
    /// report, or an array of either (evaluated in parallel).
    #[arg(long)]
    input_json: Option<PathBuf>,
    /// Absolute tolerance on C/C(0).
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Method::Hg)]
    method: Method,
    /// Merge parameter entries closer than this before evaluating.
    #[arg(long, default_value_t = 0.0)]
    tie_tol: f64,
    /// Monte Carlo sample count (method mc).
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    n: usize,
    /// Monte Carlo seed (method mc).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scale: ScaleFlags,
    #[command(flatten)]
    ode: OdeFlags,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, allow_hyphen_values = true, required = true)]
    theta: String,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    tie_tol: f64,
    #[command(flatten)]
    ode: OdeFlags,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMode {
    Discrete,
    Continuous,
}

#[derive(Args)]
struct FitArgs {
    /// CSV of unit-norm observations, one per row, p columns.
    #[arg(long, conflicts_with = "stats")]
    data: Option<PathBuf>,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
    /// Sufficient statistics (second moments), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    stats: Option<String>,
    /// Sample count behind --stats.
    #[arg(long, value_parser = parse_count, default_value = "1")]
    n: usize,
    #[arg(long, value_enum, default_value_t = FitMode::Continuous)]
    mode: FitMode,
    #[arg(long, default_value_t = DEFAULT_GRAD_TOL)]
    grad_tol: f64,
    /// Continuous mode: integrate to tau = 1 - epsilon.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Continuous mode: discrete polish steps after the flow.
    #[arg(long, default_value_t = DEFAULT_POLISH_STEPS)]
    polish_steps: usize,
    /// Row-norm tolerance for --data.
    #[arg(long, default_value_t = 1e-8)]
    norm_tol: f64,
    /// Write the iteration trace as CSV (theta columns then grad norm).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    ode: OdeFlags,
}

#[derive(Args)]
struct SpaArgs {
    #[arg(long, allow_hyphen_values = true, required = true)]
    theta: String,
    #[command(flatten)]
    scale: ScaleFlags,
}

#[derive(Args)]
struct CbArgs {
    /// Distinct complex-Bingham parameters, comma separated.
    #[arg(long, allow_hyphen_values = true, required = true)]
    phi: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, allow_hyphen_values = true, required = true)]
    theta: String,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ode: OdeFlags,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableName {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
}

#[derive(Args)]
struct TableArgs {
    #[arg(value_enum)]
    name: TableName,
}

struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { 2 } else { 3 };
        CliError {
            kind: if code == 2 { "input_validation" } else { "numerical" },
            message: e.to_string(),
            code,
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        kind: "input_validation",
        message: message.into(),
        code: 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Ok(threads) = std::env::var("BINGHAM_HGM_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({"schema": 1, "error": {"kind": e.kind, "message": e.message}})
            );
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Const(args) => cmd_const(args, cli.json),
        Cmd::Grad(args) => cmd_grad(args, cli.json),
        Cmd::Fit(args) => cmd_fit(args, cli.json),
        Cmd::Spa(args) => cmd_spa(args, cli.json),
        Cmd::Cbingham(args) => cmd_cbingham(args, cli.json),
        Cmd::Verify(args) => cmd_verify(args, cli.json),
        Cmd::Table(args) => tables::run(args.name, cli.json).map_err(CliError::from),
    }
}

fn print_report(report: &serde_json::Value, as_json: bool, text: impl FnOnce()) {
    if as_json {
        println!("{report}");
    } else {
        text();
    }
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key:<14} {value}");
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------- const ---

#[derive(Serialize, Deserialize, Clone)]
struct ConstJob {
    theta: Vec<f64>,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_method")]
    method: String,
    #[serde(default)]
    tie_tol: f64,
    #[serde(default = "default_mc_n")]
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_scale")]
    scale: String,
}

fn default_eps() -> f64 {
    1e-6
}
fn default_method() -> String {
    "hg".into()
}
fn default_mc_n() -> usize {
    1_000_000
}
fn default_scale() -> String {
    "normalized".into()
}

fn jobs_from_json(path: &PathBuf) -> CliResult<Vec<ConstJob>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| input_error(format!("bad JSON: {e}")))?;
    let one = |v: &serde_json::Value| -> CliResult<ConstJob> {
        let obj = if v.get("theta").is_some() {
            v.clone()
        } else if let Some(input) = v.get("input") {
            input.clone()
        } else {
            return Err(input_error("JSON job needs a theta field"));
        };
        serde_json::from_value(obj).map_err(|e| input_error(format!("bad job: {e}")))
    };
    match &value {
        serde_json::Value::Array(items) => items.iter().map(one).collect(),
        _ => Ok(vec![one(&value)?]),
    }
}

struct ConstOutcome {
    value: f64,
    log_value: f64,
    stderr: Option<f64>,
    diagnostics: serde_json::Value,
}

fn eval_const(job: &ConstJob, ctl: &OdeControl) -> CliResult<ConstOutcome> {
    let method = match job.method.as_str() {
        "hg" => Method::Hg,
        "series" => Method::Series,
        "mc" => Method::Mc,
        "contour" => Method::Contour,
        other => return Err(input_error(format!("unknown method {other}"))),
    };
    let scale = match job.scale.as_str() {
        "normalized" => Scale::Normalized,
        "raw" => Scale::Raw,
        "log" => Scale::Log,
        other => return Err(input_error(format!("unknown scale {other}"))),
    };
    let p = job.theta.len();
    let ln_c0 = uniform_mass(p.max(1))?.ln_value;

    // log of C/C(0) plus method diagnostics
    let (log_norm, stderr, diagnostics) = match method {
        Method::Hg => {
            let report = hg_norm_const_report(&job.theta, job.eps, ctl)?;
            let diag = json!({
                "series_n": report.series_n,
                "ode_steps": report.ode_steps,
                "seed_phi": report.seed_phi,
                "log_form": report.used_log_form,
                "multiplicities": report.theta.d(),
                "gauge_shift": report.theta.shift(),
            });
            (report.log_c_over_c0, None, diag)
        }
        Method::Series => {
            let mt = canonicalize(&job.theta, job.tie_tol)?;
            let (v, n_used) = series_norm_const(&mt, job.eps)?;
            (
                v.ln() + mt.shift(),
                None,
                json!({"series_n": n_used, "multiplicities": mt.d(), "gauge_shift": mt.shift()}),
            )
        }
        Method::Mc => {
            let est = mc_norm_const(&job.theta, job.n, job.seed);
            (
                est.mean.ln(),
                Some(est.stderr),
                json!({"n": est.n, "seed": est.seed}),
            )
        }
        Method::Contour => {
            let v = contour_norm_const(&job.theta)?;
            (v.ln(), None, json!({}))
        }
    };

    let (value, log_value) = match scale {
        Scale::Normalized => (log_norm.exp(), log_norm),
        Scale::Raw => ((log_norm + ln_c0).exp(), log_norm + ln_c0),
        Scale::Log => (log_norm + ln_c0, log_norm + ln_c0),
    };
    // stderr is on the normalized mean; rescale to match the output
    let stderr = stderr.map(|se| match scale {
        Scale::Normalized => se,
        Scale::Raw => se * ln_c0.exp(),
        Scale::Log => se / log_norm.exp(),
    });
    Ok(ConstOutcome {
        value,
        log_value,
        stderr,
        diagnostics,
    })
}

fn const_report(job: &ConstJob, out: &ConstOutcome) -> serde_json::Value {
    json!({
        "schema": 1,
        "command": "const",
        "input": job,
        "result": {
            "value": out.value,
            "log_value": out.log_value,
            "scale": job.scale,
            "stderr": out.stderr,
            "diagnostics": out.diagnostics,
        }
    })
}

fn cmd_const(args: &ConstArgs, as_json: bool) -> CliResult<()> {
    let ctl = args.ode.ctl();
    let jobs: Vec<ConstJob> = if let Some(path) = &args.input_json {
        jobs_from_json(path)?
    } else {
        let theta = match &args.theta {
            Some(t) => parse_vector(t, "theta")?,
            None => return Err(input_error("one of --theta or --input-json is required")),
        };
        vec![ConstJob {
            theta,
            eps: args.eps,
            method: args.method.name().into(),
            tie_tol: args.tie_tol,
            n: args.n,
            seed: args.seed,
            scale: args.scale.scale().name().into(),
        }]
    };

    use rayon::prelude::*;
    let outcomes: Vec<CliResult<ConstOutcome>> =
        jobs.par_iter().map(|job| eval_const(job, &ctl)).collect();

    let mut reports = Vec::with_capacity(jobs.len());
    for (job, outcome) in jobs.iter().zip(outcomes) {
        reports.push(const_report(job, &outcome?));
    }
    if as_json {
        if reports.len() == 1 {
            println!("{}", reports[0]);
        } else {
            println!("{}", serde_json::Value::Array(reports));
        }
    } else {
        for (job, report) in jobs.iter().zip(&reports) {
            let r = &report["result"];
            kv("theta", fmt_vec(&job.theta));
            kv("method", &job.method);
            kv("scale", &job.scale);
            match r["value"].as_f64() {
                Some(v) => kv("value", format!("{v:.9e}")),
                // JSON has no infinities: an overflowing raw constant lands
                // here; the log line below still carries the answer
                None => kv("value", "overflow (rerun with --log)"),
            }
            kv("log_value", format!("{:.12}", r["log_value"].as_f64().unwrap()));
            if let Some(se) = r["stderr"].as_f64() {
                kv("stderr", format!("{se:.3e}"));
            }
            kv("diagnostics", &r["diagnostics"]);
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- grad ---

fn cmd_grad(args: &GradArgs, as_json: bool) -> CliResult<()> {
    let ctl = args.ode.ctl();
    let theta = parse_vector(&args.theta, "theta")?;
    let mt = canonicalize(&theta, args.tie_tol)?;
    let report = hg_norm_const_report(&mt.expand(), args.eps, &ctl)?;
    let eta = expand_eta(&report.theta, report.gl.values());
    let c_norm = report.log_c_over_c0.exp();
    let grad_c: Vec<f64> = eta.iter().map(|e| e * c_norm).collect();

    let out = json!({
        "schema": 1,
        "command": "grad",
        "input": {"theta": theta, "eps": args.eps},
        "result": {
            "normalized_constant": c_norm,
            "log_c_over_c0": report.log_c_over_c0,
            "eta": eta,
            "grad_over_c0": grad_c,
            "multiplicities": report.theta.d(),
        }
    });
    print_report(&out, as_json, || {
        kv("theta", fmt_vec(&theta));
        kv("C/C(0)", format!("{c_norm:.9}"));
        kv("log C/C(0)", format!("{:.12}", report.log_c_over_c0));
        kv("eta", fmt_vec(&eta));
        kv("grad/C(0)", fmt_vec(&grad_c));
    });
    Ok(())
}

// ------------------------------------------------------------------ fit ---

fn read_csv(path: &PathBuf, header: bool) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && header {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| input_error(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    if rows.is_empty() {
        return Err(input_error("no data rows"));
    }
    Ok(rows)
}

fn cmd_fit(args: &FitArgs, as_json: bool) -> CliResult<()> {
    let ctl = args.ode.ctl();
    let stats = if let Some(path) = &args.data {
        let rows = read_csv(path, args.header)?;
        sufficient_stats(&rows, args.norm_tol)?
    } else if let Some(s) = &args.stats {
        SuffStats::from_moments(parse_vector(s, "stats")?, args.n)?
    } else {
        return Err(input_error("one of --data or --stats is required"));
    };

    let theta0 = default_initial_point(&stats)?;
    let (fit, mode) = match args.mode {
        FitMode::Discrete => (
            fit_discrete(&stats, &theta0, args.grad_tol, &ctl)?,
            "discrete",
        ),
        FitMode::Continuous => (
            fit_continuous(&stats, &theta0, args.epsilon, args.polish_steps, &ctl)?,
            "continuous",
        ),
    };

    if let Some(path) = &args.trace {
        let mut out = String::new();
        for it in &fit.iterations {
            let fields: Vec<String> = it
                .theta
                .iter()
                .map(|v| format!("{v:.17e}"))
                .chain([format!("{:.3e}", it.grad_norm)])
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }

    let theta_hat = fit.theta_hat.expand();
    let trace_json: Vec<serde_json::Value> = fit
        .iterations
        .iter()
        .map(|it| json!({"theta": it.theta, "grad_norm": it.grad_norm}))
        .collect();
    let out = json!({
        "schema": 1,
        "command": "fit",
        "input": {"s": stats.s(), "n_obs": stats.n_obs(), "mode": mode},
        "result": {
            "theta_hat": theta_hat,
            "eta_hat": fit.eta_hat,
            "residual": fit.residual,
            "loglik": fit.loglik,
            "iterations": fit.iterations.len(),
            "trace": trace_json,
            "theta0": theta0.expand(),
            "multiplicities": fit.theta_hat.d(),
        }
    });
    print_report(&out, as_json, || {
        kv("s", fmt_vec(stats.s()));
        kv("mode", mode);
        kv("theta0", fmt_vec(&theta0.expand()));
        kv("theta_hat", fmt_vec(&theta_hat));
        kv("eta_hat", fmt_vec(&fit.eta_hat));
        kv("residual", format!("{:.3e}", fit.residual));
        kv("loglik", format!("{:.9}", fit.loglik));
        kv("iterations", fit.iterations.len());
    });
    Ok(())
}

// ------------------------------------------------------------------ spa ---

fn cmd_spa(args: &SpaArgs, as_json: bool) -> CliResult<()> {
    let theta = parse_vector(&args.theta, "theta")?;
    let log_raw = spa1_log(&theta)?;
    let t_star = saddle_t(&theta)?.t_star;
    let ln_c0 = uniform_mass(theta.len())?.ln_value;
    let scale = args.scale.scale();
    let (value, log_value) = match scale {
        Scale::Normalized => ((log_raw - ln_c0).exp(), log_raw - ln_c0),
        Scale::Raw => (log_raw.exp(), log_raw),
        Scale::Log => (log_raw, log_raw),
    };
    let out = json!({
        "schema": 1,
        "command": "spa",
        "input": {"theta": theta},
        "result": {
            "value": value,
            "log_value": log_value,
            "scale": scale.name(),
            "saddle_t": t_star,
            "first_order": true,
        }
    });
    print_report(&out, as_json, || {
        kv("theta", fmt_vec(&theta));
        kv("scale", scale.name());
        kv("value", format!("{value:.9e}"));
        kv("saddle_t", format!("{t_star:.12}"));
        kv("note", "first-order approximation; expect a few percent error");
    });
    Ok(())
}

fn cmd_cbingham(args: &CbArgs, as_json: bool) -> CliResult<()> {
    let phi = parse_vector(&args.phi, "phi")?;
    let value = complex_bingham_const(&phi)?;
    let out = json!({
        "schema": 1,
        "command": "cbingham",
        "input": {"phi": phi},
        "result": {"value": value, "log_value": value.ln()}
    });
    print_report(&out, as_json, || {
        kv("phi", fmt_vec(&phi));
        kv("value", format!("{value:.9e}"));
    });
    Ok(())
}

// --------------------------------------------------------------- verify ---

fn cmd_verify(args: &VerifyArgs, as_json: bool) -> CliResult<()> {
    let ctl = args.ode.ctl();
    let theta = parse_vector(&args.theta, "theta")?;
    let p = theta.len();
    let (hg_log, _) = hg_norm_const(&theta, 1e-9, &ctl)?;
    let hg_val = hg_log.exp();

    let mt = canonicalize(&theta, 0.0)?;
    let series = match series_norm_const(&mt, 1e-9) {
        Ok((v, _)) => Some(v * mt.shift().exp()),
        Err(Error::SeriesBudget { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let contour = if p >= 3 {
        Some(contour_norm_const(&theta)?)
    } else {
        None
    };
    let mc = mc_norm_const(&theta, args.n, args.seed);
    let spa_norm = (spa1_log(&theta)? - uniform_mass(p)?.ln_value).exp();

    let rel = |v: f64| (v - hg_val).abs() / hg_val.abs();
    let series_ok = series.map(|v| rel(v) <= 1e-6);
    let contour_ok = contour.map(|v| rel(v) <= 1e-6);
    let mc_ok = (mc.mean - hg_val).abs() <= 4.0 * mc.stderr;
    let spa_ok = rel(spa_norm) <= 0.10;
    let all_ok = series_ok.unwrap_or(true) && contour_ok.unwrap_or(true) && mc_ok && spa_ok;

    let out = json!({
        "schema": 1,
        "command": "verify",
        "input": {"theta": theta, "n": args.n, "seed": args.seed},
        "result": {
            "hg": hg_val,
            "series": series,
            "contour": contour,
            "mc": {"mean": mc.mean, "stderr": mc.stderr},
            "spa1": spa_norm,
            "agreement": {
                "series": series_ok,
                "contour": contour_ok,
                "mc_within_4se": mc_ok,
                "spa_within_10pct": spa_ok,
            },
            "consistent": all_ok,
        }
    });
    print_report(&out, as_json, || {
        kv("theta", fmt_vec(&theta));
        kv("hg", format!("{hg_val:.10e}"));
        match series {
            Some(v) => kv("series", format!("{v:.10e}  (rel {:.1e})", rel(v))),
            None => kv("series", "skipped: truncation budget exceeded"),
        }
        match contour {
            Some(v) => kv("contour", format!("{v:.10e}  (rel {:.1e})", rel(v))),
            None => kv("contour", "skipped: requires p >= 3"),
        }
        kv(
            "mc",
            format!(
                "{:.10e} +- {:.2e}  ({:.1} se off hg)",
                mc.mean,
                mc.stderr,
                (mc.mean - hg_val).abs() / mc.stderr.max(1e-300)
            ),
        );
        kv("spa1", format!("{spa_norm:.6e}  (rel {:.2e})", rel(spa_norm)));
        kv("consistent", all_ok);
    });
    if !all_ok {
        return Err(CliError {
            kind: "numerical",
            message: "evaluation methods disagree beyond tolerance".into(),
            code: 3,
        });
    }
    Ok(())
}
