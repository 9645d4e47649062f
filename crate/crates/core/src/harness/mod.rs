//! Experiment orchestration: seeded instances, phase-transition grids,
//! convergence traces and their CSV/JSON/plot outputs.

mod bench;
mod instance;
mod output;
mod phase;
mod spec;
mod trace;

pub use bench::{loglog_slope, scaling_benchmark, time_ms, BenchOp, ScalingReport, ScalingRow};
pub use instance::{mix, random_truth, GroundTruthInstance, TrialSeeds};
pub use output::{
    cells_csv, emit_outputs, emit_trace_outputs, results_csv, trace_file_name, trace_table_csv, Manifest,
    RunKind, SeedRecord, RESULTS_HEADER,
};
pub use phase::{run_phase_transition, scan_transition, CellResult, PhaseResults, TrialResult, TransitionScan};
pub use spec::{ExperimentSpec, SolverSpec, StepKind, PRESET_NAMES};
pub use trace::{run_convergence_trace, TraceResults, TraceRow, TraceRun, TABLE_THRESHOLDS};

use crate::error::Result;
use crate::par::Parallelism;

/// Reruns the experiment recorded in a manifest.
pub fn replay_phase(manifest: &Manifest, mode: Parallelism) -> Result<PhaseResults> {
    run_phase_transition(&manifest.spec, mode)
}
