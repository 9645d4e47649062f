use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{report_error, seed_override};
use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::harness::{mix, random_truth};
use crate::operators::{BackendKind, OperatorSpec};
use crate::solvers::{Algorithm, Solver, SolverConfig, StepRule, Termination};

#[derive(Debug, Args)]
pub(super) struct SolveArgs {
    /// iht, riht or rpg (default riht).
    #[arg(long)]
    algo: Option<String>,
    /// gaussian, rankone or fourier (default gaussian).
    #[arg(long)]
    backend: Option<String>,
    #[arg(long = "M")]
    rows: Option<usize>,
    #[arg(long = "N")]
    cols: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Instance seed (SPARSELOW_SEED takes precedence).
    #[arg(long)]
    seed: Option<u64>,
    /// const or armijo (default armijo).
    #[arg(long)]
    step: Option<String>,
    /// Step size for --step const.
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// RPG threshold decay.
    #[arg(long)]
    rpg_decay: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out/solve")]
    out: PathBuf,
    /// Load the measurements and operator seed from a solve manifest.
    #[arg(long)]
    instance: Option<PathBuf>,
}

/// Written as `manifest.json`; enough to reproduce the run exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolveManifest {
    tool: String,
    version: String,
    operator: OperatorSpec,
    truth_seed: Option<u64>,
    config: SolverConfig,
    y: Vec<f64>,
    termination: String,
    iterations: usize,
}

#[derive(Serialize)]
struct Factors<'a> {
    rows: usize,
    cols: usize,
    rank: usize,
    support: &'a [usize],
    sigma: Vec<f64>,
    /// Row-major `M × r`.
    u: Vec<Vec<f64>>,
    /// Row-major `N × r`.
    v: Vec<Vec<f64>>,
}

fn rows_of(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn dense_text(x: &FactoredMatrix) -> String {
    let d = x.densify();
    let mut out = String::with_capacity(d.len() * 12);
    for i in 0..d.nrows() {
        let line: Vec<String> = d.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_step(a: &SolveArgs, fallback: StepRule) -> Result<StepRule> {
    Ok(match a.step.as_deref() {
        None => match (fallback, a.alpha) {
            (StepRule::Constant { .. }, Some(alpha)) => StepRule::Constant { alpha },
            (rule, _) => rule,
        },
        Some("armijo") => StepRule::armijo(),
        Some("const") | Some("constant") => StepRule::Constant {
            alpha: a.alpha.unwrap_or(1.0),
        },
        Some(other) => {
            return Err(Error::Parameter(format!("unknown step rule '{other}' (expected const or armijo)")))
        }
    })
}

/// Fills `config` from flags; unset flags keep the values already present.
fn apply_flags(a: &SolveArgs, mut config: SolverConfig) -> Result<SolverConfig> {
    config.step = parse_step(a, config.step)?;
    if let Some(n) = a.max_iter {
        config.max_iter = n;
    }
    if let Some(t) = a.tol {
        config.residual_tol = t;
    }
    if let Some(t) = a.rpg_decay {
        config.rpg_decay = t;
    }
    config.validate()?;
    Ok(config)
}

struct Problem {
    operator: OperatorSpec,
    truth_seed: Option<u64>,
    truth: Option<FactoredMatrix>,
    y: DVector<f64>,
    config: SolverConfig,
}

fn from_flags(a: &SolveArgs) -> Result<Problem> {
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| Error::Parameter(format!("--{flag} is required unless --instance is given")))
    };
    let dims = ProblemDims::new(
        need(a.rows, "M")?,
        need(a.cols, "N")?,
        need(a.k, "k")?,
        need(a.s, "s")?,
        need(a.m, "m")?,
    )?;
    let backend: BackendKind = a.backend.as_deref().unwrap_or("gaussian").parse()?;
    let algorithm: Algorithm = a.algo.as_deref().unwrap_or("riht").parse()?;
    let seed = seed_override(a.seed)?.unwrap_or(0);
    let operator = OperatorSpec::new(backend, &dims, mix(seed ^ 0x6f70));
    let truth_seed = mix(seed ^ 0x7472);
    let op = operator.build()?;
    let truth = random_truth(&dims, truth_seed)?;
    let y = op.apply_factored(&truth)?;
    let mut config = SolverConfig::new(algorithm, dims);
    if algorithm == Algorithm::Rpg && backend != BackendKind::Gaussian {
        config.rpg_decay = 0.999;
    }
    Ok(Problem {
        operator,
        truth_seed: Some(truth_seed),
        truth: Some(truth),
        y,
        config: apply_flags(a, config)?,
    })
}

fn from_manifest(a: &SolveArgs, path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: SolveManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut config = m.config;
    if let Some(name) = &a.algo {
        config.algorithm = name.parse()?;
    }
    let truth = m
        .truth_seed
        .map(|seed| random_truth(&config.dims, seed))
        .transpose()?;
    Ok(Problem {
        operator: m.operator,
        truth_seed: m.truth_seed,
        truth,
        y: DVector::from_vec(m.y),
        config: apply_flags(a, config)?,
    })
}

pub(super) fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let p = match &a.instance {
        Some(path) => from_manifest(a, path)?,
        None => from_flags(a)?,
    };
    let op = p.operator.build()?;
    let mut solver = Solver::new(op.as_ref(), &p.y, p.config.clone());
    if let Some(t) = &p.truth {
        solver = solver.with_truth(t);
    }
    let run = solver.run()?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let x = &run.final_iterate;
    write(&a.out.join("iterate.txt"), dense_text(x).as_bytes())?;
    let factors = Factors {
        rows: x.rows(),
        cols: x.cols(),
        rank: x.rank(),
        support: x.support().indices(),
        sigma: x.sigma().iter().copied().collect(),
        u: rows_of(x.u()),
        v: rows_of(x.v()),
    };
    write(
        &a.out.join("factors.json"),
        (serde_json::to_string_pretty(&factors).expect("factors serialize") + "\n").as_bytes(),
    )?;
    let mut trace = Vec::new();
    run.write_trace_csv(&mut trace)?;
    write(&a.out.join("trace.csv"), &trace)?;
    let manifest = SolveManifest {
        tool: "sparselow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        operator: p.operator,
        truth_seed: p.truth_seed,
        config: p.config,
        y: p.y.iter().copied().collect(),
        termination: run.termination.as_str().into(),
        iterations: run.iteration_count(),
    };
    write(
        &a.out.join("manifest.json"),
        (serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n").as_bytes(),
    )?;

    let summary = json!({
        "termination": run.termination.as_str(),
        "iterations": run.iteration_count(),
        "residual": run.final_residual(),
        "relError": run.final_rel_error(),
        "out": a.out.display().to_string(),
    });
    println!("{summary}");
    Ok(match &run.termination {
        Termination::Converged => 0,
        Termination::MaxIter => 2,
        Termination::NumericalError(msg) => {
            report_error(&Error::Numerical(msg.clone()));
            1
        }
    })
}
