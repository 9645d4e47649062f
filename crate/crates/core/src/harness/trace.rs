use std::time::Instant;

use serde::Serialize;

use super::instance::{GroundTruthInstance, TrialSeeds};
use super::phase::run_solver;
use super::spec::ExperimentSpec;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::solvers::RunRecord;

/// Error levels reported in the iterations-to-threshold table.
pub const TABLE_THRESHOLDS: [f64; 3] = [1e-1, 1e-3, 1e-5];

#[derive(Debug, Clone)]
pub struct TraceRun {
    pub trial: usize,
    pub solver: String,
    pub seeds: TrialSeeds,
    pub record: RunRecord,
    /// Milliseconds since the start of the run at each record (empty unless
    /// timing is enabled).
    pub elapsed_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub trial: usize,
    pub solver: String,
    pub threshold: f64,
    pub iterations: Option<usize>,
    pub wall_clock_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TraceResults {
    pub spec: ExperimentSpec,
    pub runs: Vec<TraceRun>,
    pub table: Vec<TraceRow>,
}

impl TraceResults {
    fn rows(&self, solver: &str, threshold: f64) -> impl Iterator<Item = &TraceRow> {
        let solver = solver.to_string();
        self.table
            .iter()
            .filter(move |r| r.solver == solver && r.threshold == threshold)
    }

    /// Trials that reached `threshold`.
    pub fn reached(&self, solver: &str, threshold: f64) -> usize {
        self.rows(solver, threshold).filter(|r| r.iterations.is_some()).count()
    }

    /// Median iterations to `threshold`, counting trials that never got
    /// there as infinitely slow.
    pub fn median_iterations(&self, solver: &str, threshold: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .rows(solver, threshold)
            .map(|r| r.iterations.map_or(f64::INFINITY, |i| i as f64))
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        med.is_finite().then_some(med)
    }

    /// Total wall-clock of solver `a` over solver `b` (needs timing).
    pub fn wall_clock_ratio(&self, a: &str, b: &str) -> Option<f64> {
        let total = |s: &str| -> f64 {
            self.runs
                .iter()
                .filter(|r| r.solver == s)
                .filter_map(|r| r.elapsed_ms.last())
                .sum()
        };
        let (ta, tb) = (total(a), total(b));
        (tb > 0.0).then(|| ta / tb)
    }
}

/// Runs every solver of a single-cell spec on `trials` shared instances and
/// tabulates the iterations needed to reach each threshold.
pub fn run_convergence_trace(spec: &ExperimentSpec, mode: Parallelism) -> Result<TraceResults> {
    spec.validate()?;
    let cells = spec.cells();
    if cells.len() != 1 {
        return Err(Error::Parameter(format!(
            "a convergence trace needs a single (m, s, N) cell, '{}' has {}",
            spec.name,
            cells.len()
        )));
    }
    let dims = cells[0];
    let mode = if spec.record_timing { Parallelism::Sequential } else { mode };
    let per_trial = par::map((0..spec.trials).collect(), mode, |trial| -> Result<Vec<TraceRun>> {
        let seeds = TrialSeeds::derive(spec.seed_base, &dims, trial);
        let inst = GroundTruthInstance::generate(spec.backend, dims, seeds)?;
        let mut runs = Vec::new();
        for solver in &spec.solvers {
            let mut elapsed = Vec::new();
            let start = Instant::now();
            let record = if spec.record_timing {
                let mut obs = |_: &crate::solvers::IterationRecord| {
                    elapsed.push(start.elapsed().as_secs_f64() * 1e3)
                };
                run_solver(spec, solver, &inst, Some(&mut obs))?
            } else {
                run_solver(spec, solver, &inst, None)?
            };
            runs.push(TraceRun {
                trial,
                solver: solver.label(),
                seeds,
                record,
                elapsed_ms: elapsed,
            });
        }
        Ok(runs)
    });
    let mut runs = Vec::new();
    for r in per_trial {
        runs.extend(r?);
    }
    let mut table = Vec::new();
    for run in &runs {
        for &threshold in &TABLE_THRESHOLDS {
            let iterations = run.record.first_iteration_below(threshold);
            table.push(TraceRow {
                trial: run.trial,
                solver: run.solver.clone(),
                threshold,
                iterations,
                wall_clock_ms: iterations.and_then(|i| run.elapsed_ms.get(i).copied()),
            });
        }
    }
    Ok(TraceResults {
        spec: spec.clone(),
        runs,
        table,
    })
}
