//! Command-line front end.
//!
//! Every subcommand reads margins from a file (or stdin for `-`) and prints
//! one report, JSON by default. Failures go to stderr as
//! `{"error": <kind>, "message": <text>}` with exit code 1 for bad input and
//! 2 when a valid input could not be processed.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::edgeworth::{render_decimal, run_pipeline, EstimateConfig};
use crate::error::{Error, Result};
use crate::margins::{scale_and_round, Margins};
use crate::oracle::{
    brute_enumerate, default_grid, exact_count, geometric_mc_count, integral_count,
    work_estimate, DpConfig, ExactCount, DEFAULT_STATE_BUDGET, MAX_DIMENSION,
};
use crate::typical::{solve_typical, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Quadrature is skipped by `check` above this many multiply-adds.
const CHECK_QUADRATURE_WORK: f64 = 2e9;
/// Sampling is skipped by `check` below this many expected hits.
const CHECK_MIN_EXPECTED_HITS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
}

/// Numeric settings shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Points per axis for quadrature; `None` picks one from the margins.
    pub grid: Option<usize>,
    pub samples: u64,
    pub seed: u64,
    pub state_budget: u64,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            grid: None,
            samples: 1_000_000,
            seed: 42,
            state_budget: DEFAULT_STATE_BUDGET,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be positive")));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol");
        }
        if self.max_iter == 0 {
            return bad("max-iter");
        }
        if self.grid == Some(0) {
            return bad("grid");
        }
        if self.samples == 0 {
            return bad("samples");
        }
        if self.state_budget == 0 {
            return bad("state-budget");
        }
        Ok(())
    }

    fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            hyperplane: None,
        }
    }

    fn dp_config(&self) -> DpConfig {
        DpConfig {
            state_budget: self.state_budget,
            ..DpConfig::default()
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ctcount", version, about = "Count contingency tables with given margins")]
struct Args {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Convergence tolerance for the typical matrix.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Quadrature points per axis (default: chosen from the margins).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Largest number of live states the exact counter may hold.
    #[arg(long, global = true, default_value_t = DEFAULT_STATE_BUDGET)]
    state_budget: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Asymptotic estimate of the number of tables.
    Estimate { margins: PathBuf },
    /// Exact count.
    Exact {
        margins: PathBuf,
        /// Enumerate tables instead of running the dynamic program.
        #[arg(long)]
        brute: bool,
    },
    /// Typical matrix and dual potentials.
    Typical { margins: PathBuf },
    /// Count by numerical integration (at most 5 free coordinates).
    Integral { margins: PathBuf },
    /// Count by sampling from the geometric distribution.
    Sample { margins: PathBuf },
    /// Estimate plus every applicable oracle, with relative errors.
    Check { margins: PathBuf },
    /// Scale margins by alpha and round to integers.
    Scale {
        margins: PathBuf,
        #[arg(long)]
        alpha: f64,
    },
}

/// Runs the command line with process stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line, writing the report to `out` and errors to `err`.
/// Returns the process exit code.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let obj = json!({"error": "usage", "message": e.to_string().trim_end()});
            let _ = writeln!(err, "{obj}");
            return 1;
        }
    };
    let cfg = RunConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        grid: args.grid,
        samples: args.samples,
        seed: args.seed,
        state_budget: args.state_budget,
        format: args.format,
    };
    let result = cfg.validate().and_then(|()| {
        if args.threads == 0 {
            execute(&args.command, &cfg)
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(args.threads)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| execute(&args.command, &cfg))
        }
    });
    match result {
        Ok(report) => {
            let text = match cfg.format {
                Format::Json => serde_json::to_string_pretty(&report).expect("report serializes"),
                Format::Text => render_text(&report),
            };
            let _ = writeln!(out, "{text}");
            0
        }
        Err(e) => {
            let obj = json!({"error": e.kind(), "message": e.to_string()});
            let _ = writeln!(err, "{obj}");
            if e.is_computational() {
                2
            } else {
                1
            }
        }
    }
}

fn report(command: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<Value> {
    match command {
        Command::Estimate { margins } => {
            let margins = Margins::from_path(margins)?;
            let p = run_pipeline(&margins, &cfg.estimate_config())?;
            let mut body = to_value(&p.estimate);
            body["count"] = json!(render_decimal(p.estimate.log_count));
            body["gaussian_count"] = json!(render_decimal(p.estimate.gaussian_log));
            body["iterations"] = json!(p.solution.iterations);
            Ok(report("estimate", body))
        }
        Command::Exact { margins, brute } => {
            let margins = Margins::from_path(margins)?;
            let count = if *brute {
                brute_enumerate(&margins)?
            } else {
                exact_count(&margins, &cfg.dp_config())?
            };
            Ok(report("exact", to_value(&count)))
        }
        Command::Typical { margins } => {
            let margins = Margins::from_path(margins)?;
            let sol = solve_typical(&margins, cfg.tol, cfg.max_iter)?;
            Ok(report("typical", to_value(&sol)))
        }
        Command::Integral { margins } => {
            let margins = Margins::from_path(margins)?;
            let sol = solve_typical(&margins, cfg.tol, cfg.max_iter)?;
            let grid = cfg.grid.unwrap_or_else(|| default_grid(&sol, &margins));
            Ok(report("integral", to_value(&integral_count(&sol, &margins, grid)?)))
        }
        Command::Sample { margins } => {
            let margins = Margins::from_path(margins)?;
            let sol = solve_typical(&margins, cfg.tol, cfg.max_iter)?;
            let mc = geometric_mc_count(&sol, &margins, cfg.samples, cfg.seed)?;
            let mut body = to_value(&mc);
            body["seed"] = json!(cfg.seed);
            Ok(report("sample", body))
        }
        Command::Check { margins } => {
            let margins = Margins::from_path(margins)?;
            check(&margins, cfg).map(|body| report("check", body))
        }
        Command::Scale { margins, alpha } => {
            let margins = Margins::from_path(margins)?;
            let scaled = scale_and_round(&margins, *alpha)?;
            Ok(report("scale", to_value(&scaled)))
        }
    }
}

fn skipped(reason: String) -> Value {
    json!({"status": "skipped", "reason": reason})
}

fn check(margins: &Margins, cfg: &RunConfig) -> Result<Value> {
    let p = run_pipeline(margins, &cfg.estimate_config())?;
    let est = &p.estimate;
    let (exact, budget_miss) = match exact_count(margins, &cfg.dp_config()) {
        Ok(e) => (Some(e), None),
        Err(Error::BudgetExceeded { estimate, budget }) => (None, Some((estimate, budget))),
        Err(e) => return Err(e),
    };
    let exact_ln = exact.as_ref().map(ExactCount::ln);
    let rel_log = |log_value: f64| exact_ln.map(|e| (log_value - e).exp_m1().abs());
    let rel = |value: f64| exact.as_ref().map(|e| (value / e.to_f64() - 1.0).abs());

    let mut body = json!({
        "rows": margins.rows(),
        "cols": margins.cols(),
        "estimate": render_decimal(est.log_count),
        "estimate_log": est.log_count,
        "gaussian": render_decimal(est.gaussian_log),
        "gaussian_log": est.gaussian_log,
        "mu": est.mu,
        "nu": est.nu,
        "estimate_rel_error": rel_log(est.log_count),
        "gaussian_rel_error": rel_log(est.gaussian_log),
    });
    body["exact"] = match &exact {
        Some(e) => json!({"status": "ok", "value": e.value.to_str_radix(10), "log": e.ln()}),
        None => {
            let (estimate, budget) = budget_miss.unwrap_or_default();
            skipped(format!("state estimate {estimate:.3e} exceeds budget {budget}"))
        }
    };

    let dim = margins.m() + margins.n() - 1;
    let grid = cfg.grid.unwrap_or_else(|| default_grid(&p.solution, margins));
    body["quadrature"] = if dim > MAX_DIMENSION {
        skipped(format!("{dim} free coordinates exceed {MAX_DIMENSION}"))
    } else if work_estimate(margins, grid) > CHECK_QUADRATURE_WORK {
        skipped(format!("grid {grid} is too expensive"))
    } else {
        let q = integral_count(&p.solution, margins, grid)?;
        json!({
            "status": "ok",
            "estimate": q.estimate,
            "imag_part": q.imag_part,
            "grid": q.grid_points_per_axis,
            "rel_error": rel(q.estimate),
        })
    };

    let expected_hits = cfg.samples as f64 * (est.log_count - p.solution.g_of_z).exp();
    body["sample"] = if expected_hits < CHECK_MIN_EXPECTED_HITS {
        skipped(format!("about {expected_hits:.3e} expected hits"))
    } else {
        let mc = geometric_mc_count(&p.solution, margins, cfg.samples, cfg.seed)?;
        json!({
            "status": "ok",
            "estimate": mc.estimate,
            "std_error": mc.std_error,
            "hits": mc.hits,
            "samples": mc.samples,
            "rel_error": rel(mc.estimate),
        })
    };
    Ok(body)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => items
            .iter()
            .map(scalar_text)
            .collect::<Vec<_>>()
            .join(","),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_text(other))),
    }
}

/// Two-column `key  value` table with nested keys joined by dots.
fn render_text(report: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", report, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
