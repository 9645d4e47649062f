use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::instance::{GroundTruthInstance, TrialSeeds};
use super::spec::{ExperimentSpec, SolverSpec};
use crate::dims::ProblemDims;
use crate::error::Result;
use crate::operators::BackendKind;
use crate::par::{self, Parallelism};
use crate::solvers::{Algorithm, RunRecord, Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub solver: String,
    pub algorithm: Algorithm,
    pub m: usize,
    pub s: usize,
    pub n: usize,
    pub k: usize,
    pub rows: usize,
    pub backend: BackendKind,
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub iterations: usize,
    /// `NaN` when the run could not be started.
    pub final_rel_error: f64,
    pub success: bool,
    pub wall_clock_ms: f64,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub solver: String,
    pub m: usize,
    pub s: usize,
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub mean_iterations: f64,
    pub mean_wall_clock_ms: f64,
}

impl CellResult {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    fn from_trials(solver: &str, d: &ProblemDims, trials: &[&TrialResult]) -> CellResult {
        let n = trials.len().max(1) as f64;
        CellResult {
            solver: solver.to_string(),
            m: d.measurements,
            s: d.sparsity,
            n: d.cols,
            successes: trials.iter().filter(|t| t.success).count(),
            trials: trials.len(),
            mean_iterations: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / n,
            mean_wall_clock_ms: trials.iter().map(|t| t.wall_clock_ms).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResults {
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialResult>,
    pub cells: Vec<CellResult>,
}

impl PhaseResults {
    pub fn cell(&self, solver: &str, m: usize, s: usize, n: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.solver == solver && c.m == m && c.s == s && c.n == n)
    }
}

pub(crate) fn solver_config(spec: &ExperimentSpec, solver: &SolverSpec, dims: ProblemDims) -> SolverConfig {
    SolverConfig::new(solver.algorithm, dims)
        .with_step(solver.step_rule())
        .with_max_iter(solver.iteration_cap())
        .with_rpg_decay(spec.rpg_decay)
        .with_error_tol(spec.error_tol)
}

/// Runs one solver on an instance; the observer (if any) sees every record.
pub(crate) fn run_solver(
    spec: &ExperimentSpec,
    solver: &SolverSpec,
    inst: &GroundTruthInstance,
    observer: Option<&mut dyn FnMut(&crate::solvers::IterationRecord)>,
) -> Result<RunRecord> {
    let config = solver_config(spec, solver, inst.dims);
    let mut s = Solver::new(inst.operator.as_ref(), &inst.y, config).with_truth(&inst.truth);
    if let Some(obs) = observer {
        s = s.with_observer(obs);
    }
    s.run()
}

/// One trial of a cell: a single instance shared by all `solvers`.
pub(crate) fn run_trial(
    spec: &ExperimentSpec,
    solvers: &[SolverSpec],
    dims: ProblemDims,
    trial: usize,
) -> Vec<TrialResult> {
    let seeds = TrialSeeds::derive(spec.seed_base, &dims, trial);
    let inst = GroundTruthInstance::generate(spec.backend, dims, seeds);
    solvers
        .iter()
        .map(|solver| {
            let start = Instant::now();
            let outcome = inst
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|inst| run_solver(spec, solver, inst, None).map_err(|e| e.to_string()));
            let ms = if spec.record_timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let (iterations, err, termination) = match &outcome {
                Ok(run) => (
                    run.iteration_count(),
                    run.final_rel_error().unwrap_or(f64::NAN),
                    run.termination.as_str().to_string(),
                ),
                Err(msg) => (0, f64::NAN, format!("error: {msg}")),
            };
            TrialResult {
                solver: solver.label(),
                algorithm: solver.algorithm,
                m: dims.measurements,
                s: dims.sparsity,
                n: dims.cols,
                k: dims.rank,
                rows: dims.rows,
                backend: spec.backend,
                trial,
                seeds,
                iterations,
                final_rel_error: err,
                success: err <= spec.success_threshold,
                wall_clock_ms: ms,
                termination,
            }
        })
        .collect()
}

/// Runs every `(cell, trial)` of the grid; trials execute concurrently and
/// results come back in grid order regardless of scheduling.
pub fn run_phase_transition(spec: &ExperimentSpec, mode: Parallelism) -> Result<PhaseResults> {
    spec.validate()?;
    let mode = if spec.record_timing { Parallelism::Sequential } else { mode };
    let units: Vec<(ProblemDims, usize)> = spec
        .cells()
        .into_iter()
        .flat_map(|d| (0..spec.trials).map(move |t| (d, t)))
        .collect();
    let trials: Vec<TrialResult> = par::map(units, mode, |(d, t)| run_trial(spec, &spec.solvers, d, t))
        .into_iter()
        .flatten()
        .collect();
    let mut cells = Vec::new();
    for d in spec.cells() {
        for solver in &spec.solvers {
            let label = solver.label();
            let mine: Vec<&TrialResult> = trials
                .iter()
                .filter(|t| t.solver == label && t.m == d.measurements && t.s == d.sparsity && t.n == d.cols)
                .collect();
            cells.push(CellResult::from_trials(&label, &d, &mine));
        }
    }
    Ok(PhaseResults {
        spec: spec.clone(),
        trials,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionScan {
    pub solver: String,
    pub s: usize,
    pub n: usize,
    /// Smallest `m` such that it and every larger grid value reach the rate.
    pub m_min: Option<usize>,
    /// Cells evaluated, from the largest `m` down.
    pub cells: Vec<CellResult>,
}

/// Locates the transition of every `(solver, s, N)` column by scanning `m`
/// from the top of the grid down, stopping at the first cell that misses
/// `min_rate`. A cell is abandoned as soon as it has more failures than the
/// rate allows.
pub fn scan_transition(spec: &ExperimentSpec, min_rate: f64, mode: Parallelism) -> Result<Vec<TransitionScan>> {
    spec.validate()?;
    let required = (min_rate * spec.trials as f64).ceil() as usize;
    let allowed_failures = spec.trials.saturating_sub(required);
    let batch = par::threads(mode).max(1);
    let mut m_desc = spec.m_values.clone();
    m_desc.sort_unstable_by(|a, b| b.cmp(a));
    m_desc.dedup();

    let mut out = Vec::new();
    for solver in &spec.solvers {
        for &s in &spec.s_values {
            for n in spec.cols_for(s) {
                let mut scan = TransitionScan {
                    solver: solver.label(),
                    s,
                    n,
                    m_min: None,
                    cells: Vec::new(),
                };
                for &m in &m_desc {
                    let d = ProblemDims::new(spec.rows, n, spec.rank, s, m)?;
                    let mut results: Vec<TrialResult> = Vec::new();
                    let mut next = 0;
                    while next < spec.trials {
                        let ids: Vec<usize> = (next..(next + batch).min(spec.trials)).collect();
                        next += ids.len();
                        results.extend(
                            par::map(ids, mode, |t| run_trial(spec, std::slice::from_ref(solver), d, t))
                                .into_iter()
                                .flatten(),
                        );
                        if results.iter().filter(|r| !r.success).count() > allowed_failures {
                            break;
                        }
                    }
                    let refs: Vec<&TrialResult> = results.iter().collect();
                    let cell = CellResult::from_trials(&solver.label(), &d, &refs);
                    let passed = cell.successes >= required;
                    scan.cells.push(cell);
                    if !passed {
                        break;
                    }
                    scan.m_min = Some(m);
                }
                out.push(scan);
            }
        }
    }
    Ok(out)
}
