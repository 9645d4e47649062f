use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::phase::PhaseResults;
use super::spec::ExperimentSpec;
use super::trace::TraceResults;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 12] = [
    "solver",
    "m",
    "s",
    "N",
    "k",
    "M",
    "backend",
    "trial",
    "iterations",
    "finalRelError",
    "success",
    "wallClockMs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Phase,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub m: usize,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub operator_seed: u64,
    pub truth_seed: u64,
}

/// Everything needed to rerun an experiment: the spec (which determines all
/// seeds) plus the derived seeds for reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: RunKind,
    pub spec: ExperimentSpec,
    pub seeds: Vec<SeedRecord>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:e}")
    }
}

pub fn results_csv(results: &PhaseResults) -> String {
    csv_string(
        &RESULTS_HEADER,
        results.trials.iter().map(|t| {
            vec![
                t.solver.clone(),
                t.m.to_string(),
                t.s.to_string(),
                t.n.to_string(),
                t.k.to_string(),
                t.rows.to_string(),
                t.backend.to_string(),
                t.trial.to_string(),
                t.iterations.to_string(),
                fmt_f64(t.final_rel_error),
                t.success.to_string(),
                format!("{:.3}", t.wall_clock_ms),
            ]
        }),
    )
}

pub fn cells_csv(results: &PhaseResults) -> String {
    csv_string(
        &["solver", "m", "s", "N", "successes", "trials", "rate", "meanIterations", "meanWallClockMs"],
        results.cells.iter().map(|c| {
            vec![
                c.solver.clone(),
                c.m.to_string(),
                c.s.to_string(),
                c.n.to_string(),
                c.successes.to_string(),
                c.trials.to_string(),
                fmt_f64(c.rate()),
                fmt_f64(c.mean_iterations),
                format!("{:.3}", c.mean_wall_clock_ms),
            ]
        }),
    )
}

/// Gnuplot script: one log-log success-rate panel per solver with a
/// slope-one guide through the middle of the grid.
fn phase_plot_script(spec: &ExperimentSpec) -> String {
    let x_axis = if spec.cols_equal_sparsity { "s = N" } else { "s" };
    let xs: Vec<f64> = spec.s_values.iter().map(|&v| v as f64).collect();
    let ms: Vec<f64> = spec.m_values.iter().map(|&v| v as f64).collect();
    let geo = |v: &[f64]| (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp();
    let (x0, m0) = (geo(&xs), geo(&ms));
    let mut out = format!(
        "# success rate, {name}: {backend}, M = {rows}, k = {rank}\n\
         set datafile separator ','\n\
         set logscale xy\n\
         set xlabel '{x_axis}'\n\
         set ylabel 'm'\n\
         set cbrange [0:1]\n\
         set palette gray negative\n\
         guide(x) = {m0:.6} * x / {x0:.6}\n",
        name = spec.name,
        backend = spec.backend,
        rows = spec.rows,
        rank = spec.rank,
    );
    let panels = spec.solvers.len();
    out.push_str(&format!("set multiplot layout 1,{panels}\n"));
    for s in &spec.solvers {
        let label = s.label();
        out.push_str(&format!(
            "set title '{label}'\n\
             plot 'cells.csv' using 3:(strcol(1) eq '{label}' ? $2 : 1/0):7 with points pt 5 ps 2 palette notitle, \\\n     \
             guide(x) with lines lc rgb 'red' lw 2 title 'slope 1'\n"
        ));
    }
    out.push_str("unset multiplot\n");
    out
}

fn trace_plot_script(results: &TraceResults) -> String {
    let mut out = format!(
        "# relative error against iterations, {name}\n\
         set datafile separator ','\n\
         set logscale y\n\
         set xlabel 'iteration'\n\
         set ylabel 'relative error'\n\
         set key outside\n\
         plot ",
        name = results.spec.name
    );
    let plots: Vec<String> = results
        .runs
        .iter()
        .filter(|r| r.trial == 0)
        .map(|r| {
            format!(
                "'{}' using 1:4 skip 1 with lines title '{}'",
                trace_file_name(r.trial, &r.solver),
                r.solver
            )
        })
        .collect();
    out.push_str(&plots.join(", \\\n     "));
    out.push('\n');
    out
}

fn seeds_of(spec: &ExperimentSpec) -> Vec<SeedRecord> {
    let mut out = Vec::new();
    for d in spec.cells() {
        for trial in 0..spec.trials {
            let seeds = super::instance::TrialSeeds::derive(spec.seed_base, &d, trial);
            out.push(SeedRecord {
                m: d.measurements,
                s: d.sparsity,
                n: d.cols,
                trial,
                operator_seed: seeds.operator,
                truth_seed: seeds.truth,
            });
        }
    }
    out
}

fn manifest(spec: &ExperimentSpec, kind: RunKind, files: &[PathBuf]) -> String {
    let m = Manifest {
        tool: "sparselow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind,
        spec: spec.clone(),
        seeds: seeds_of(spec),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"
}

/// Writes `results.csv`, `cells.csv`, `manifest.json` and `plot.script`.
pub fn emit_outputs(results: &PhaseResults, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    write(out_dir.join("results.csv"), &results_csv(results), &mut written)?;
    write(out_dir.join("cells.csv"), &cells_csv(results), &mut written)?;
    write(out_dir.join("plot.script"), &phase_plot_script(&results.spec), &mut written)?;
    let m = manifest(&results.spec, RunKind::Phase, &written);
    write(out_dir.join("manifest.json"), &m, &mut written)?;
    Ok(written)
}

pub fn trace_file_name(trial: usize, solver: &str) -> String {
    format!("trace-{trial}-{solver}.csv")
}

pub fn trace_table_csv(results: &TraceResults) -> String {
    csv_string(
        &["trial", "solver", "threshold", "iterations", "wallClockMs"],
        results.table.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.solver.clone(),
                fmt_f64(r.threshold),
                r.iterations.map_or_else(String::new, |i| i.to_string()),
                r.wall_clock_ms.map_or_else(String::new, |t| format!("{t:.3}")),
            ]
        }),
    )
}

/// Writes `table.csv`, one `trace-<trial>-<solver>.csv` per run,
/// `manifest.json` and `plot.script`.
pub fn emit_trace_outputs(results: &TraceResults, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    write(out_dir.join("table.csv"), &trace_table_csv(results), &mut written)?;
    for run in &results.runs {
        let path = out_dir.join(trace_file_name(run.trial, &run.solver));
        let mut buf = Vec::new();
        run.record.write_trace_csv(&mut buf)?;
        write(path, &String::from_utf8_lossy(&buf), &mut written)?;
    }
    write(out_dir.join("plot.script"), &trace_plot_script(results), &mut written)?;
    let m = manifest(&results.spec, RunKind::Trace, &written);
    write(out_dir.join("manifest.json"), &m, &mut written)?;
    Ok(written)
}

