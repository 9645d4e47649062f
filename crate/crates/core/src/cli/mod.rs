//! Command-line front end. Exit codes: 0 success (solver converged), 2 the
//! solver hit its iteration cap, 1 any error. Errors are written to stderr as
//! one-line JSON records.

mod solve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::{
    emit_outputs, emit_trace_outputs, run_convergence_trace, run_phase_transition, scaling_benchmark,
    BenchOp, ExperimentSpec, Manifest, PRESET_NAMES,
};
use crate::oracle::verify;
use crate::operators::BackendKind;
use crate::par::{self, Parallelism};

pub const SEED_ENV: &str = "SPARSELOW_SEED";

#[derive(Debug, Parser)]
#[command(name = "sparselow", version, about = "Recovery of row-sparse low-rank matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover one instance and write the iterate, its factors and the trace.
    Solve(solve::SolveArgs),
    /// Run a phase-transition grid.
    Phase(ExperimentArgs),
    /// Run a convergence trace on a single-cell experiment.
    Trace(ExperimentArgs),
    /// Time an operator kernel across sizes and fit its scaling exponent.
    Bench(BenchArgs),
    /// Check the library against the brute-force oracles.
    #[command(hide = true)]
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Built-in experiment.
    #[arg(long, conflicts_with_all = ["spec", "manifest"])]
    preset: Option<String>,
    /// Experiment spec in TOML.
    #[arg(long, conflicts_with = "manifest")]
    spec: Option<PathBuf>,
    /// Rerun the experiment recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the number of trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the seed base (SPARSELOW_SEED takes precedence).
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock times (outputs then differ between runs).
    #[arg(long)]
    timing: bool,
    /// Output directory (default: out/<experiment name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of concurrent trials.
    #[arg(long)]
    jobs: Option<usize>,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "projected-adjoint")]
    op: String,
    #[arg(long, default_value = "rankone")]
    backend: String,
    /// Values of M = N.
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub(crate) fn report_error(e: &Error) {
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
}

/// `SPARSELOW_SEED` if set and valid, else the flag value.
pub(crate) fn seed_override(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Parameter(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(flag),
    }
}

fn load_experiment(a: &ExperimentArgs) -> Result<ExperimentSpec> {
    let mut spec = if let Some(path) = &a.manifest {
        // a replay uses the recorded spec verbatim
        return Ok(Manifest::load(path)?.spec);
    } else if let Some(name) = &a.preset {
        ExperimentSpec::preset(name).ok_or_else(|| {
            Error::Parameter(format!("unknown preset '{name}' (available: {})", PRESET_NAMES.join(", ")))
        })?
    } else if let Some(path) = &a.spec {
        ExperimentSpec::load(path)?
    } else {
        return Err(Error::Parameter("one of --preset, --spec or --manifest is required".into()));
    };
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(seed) = seed_override(a.seed)? {
        spec.seed_base = seed;
    }
    if a.timing {
        spec.record_timing = true;
    }
    spec.validate()?;
    Ok(spec)
}

fn mode(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn cmd_phase(a: &ExperimentArgs) -> Result<i32> {
    let spec = load_experiment(a)?;
    let results = par::with_jobs(a.jobs, || run_phase_transition(&spec, mode(a.sequential)))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
    emit_outputs(&results, &out)?;
    println!("{:<16} {:>6} {:>4} {:>4} {:>8} {:>10}", "solver", "m", "s", "N", "rate", "mean iter");
    for c in &results.cells {
        println!(
            "{:<16} {:>6} {:>4} {:>4} {:>8.2} {:>10.1}",
            c.solver,
            c.m,
            c.s,
            c.n,
            c.rate(),
            c.mean_iterations
        );
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_trace(a: &ExperimentArgs) -> Result<i32> {
    let spec = load_experiment(a)?;
    let results = par::with_jobs(a.jobs, || run_convergence_trace(&spec, mode(a.sequential)))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
    emit_trace_outputs(&results, &out)?;
    println!("{:<16} {:>10} {:>14} {:>8}", "solver", "threshold", "median iter", "reached");
    for s in &spec.solvers {
        let label = s.label();
        for &t in &crate::harness::TABLE_THRESHOLDS {
            let med = results
                .median_iterations(&label, t)
                .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
            println!(
                "{:<16} {:>10.0e} {:>14} {:>5}/{}",
                label,
                t,
                med,
                results.reached(&label, t),
                spec.trials
            );
        }
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let op: BenchOp = a.op.parse()?;
    let backend: BackendKind = a.backend.parse()?;
    let report = scaling_benchmark(op, backend, &a.sizes, a.k, a.m, a.reps, a.seed)?;
    println!("# {op} on {backend}, k = {}, m = {}", a.k, a.m);
    println!("{:>8} {:>14} {:>14} {:>8}", "M=N", "factored ms", "dense ms", "ratio");
    let mut csv = String::from("size,fastMs,denseMs\n");
    for r in &report.rows {
        let dense = r.dense_ms.map_or_else(|| "-".to_string(), |d| format!("{d:.4}"));
        let ratio = r.dense_ms.map_or_else(|| "-".to_string(), |d| format!("{:.1}", d / r.fast_ms));
        println!("{:>8} {:>14.4} {:>14} {:>8}", r.size, r.fast_ms, dense, ratio);
        csv.push_str(&format!(
            "{},{},{}\n",
            r.size,
            r.fast_ms,
            r.dense_ms.map_or_else(String::new, |d| d.to_string())
        ));
    }
    println!("fitted exponent (factored): {:.3}", report.fast_exponent);
    if let Some(e) = report.dense_exponent {
        println!("fitted exponent (dense):    {e:.3}");
    }
    if let Some(path) = &a.out {
        std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let results = verify::run_all(a.instances, a.seed)?;
    let mut ok = true;
    for r in &results {
        ok &= r.passed();
        println!(
            "{} {} ({} cases, {} failures, worst {:.3e})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.failures,
            r.worst
        );
    }
    Ok(if ok { 0 } else { 1 })
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return 1;
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => solve::cmd_solve(a),
        Command::Phase(a) => cmd_phase(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
