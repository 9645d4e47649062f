use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;

/// State after one iteration. Record 0 describes the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub residual_norm: f64,
    pub rel_error: Option<f64>,
    /// Accepted step size (0 for the starting point).
    pub step: f64,
    pub backtracks: usize,
    pub fallback: bool,
    /// Norm of the search direction at the previous iterate: the full
    /// gradient for IHT, the Riemannian gradient otherwise.
    pub direction_norm: f64,
    /// Shared with the previous record when unchanged.
    pub support: Arc<SupportSet>,
    pub rank: usize,
    /// RPG threshold `μ_ℓ` and the `k`-th largest row norm it was scaled from.
    pub mu: Option<f64>,
    pub kth_row_norm: Option<f64>,
    /// The step started from an iterate of rank below `k`.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "camelCase")]
pub enum Termination {
    Converged,
    MaxIter,
    NumericalError(String),
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "maxIter",
            Termination::NumericalError(_) => "numericalError",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub iterations: Vec<IterationRecord>,
    pub final_iterate: FactoredMatrix,
    pub termination: Termination,
}

impl RunRecord {
    /// Number of updates performed (the starting point is not counted).
    pub fn iteration_count(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.iterations.last().and_then(|r| r.rel_error)
    }

    pub fn final_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.residual_norm)
    }

    /// First iteration whose relative error is at most `threshold`.
    pub fn first_iteration_below(&self, threshold: f64) -> Option<usize> {
        self.iterations
            .iter()
            .find(|r| r.rel_error.is_some_and(|e| e <= threshold))
            .map(|r| r.iteration)
    }

    pub fn rank_deficient_steps(&self) -> usize {
        self.iterations.iter().filter(|r| r.rank_deficient).count()
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt_err = |e: csv::Error| Error::Format {
            path: "trace.csv".into(),
            message: e.to_string(),
        };
        w.write_record([
            "iteration",
            "objective",
            "residual",
            "relError",
            "step",
            "backtracks",
            "fallback",
            "directionNorm",
            "rank",
            "supportSize",
            "mu",
            "support",
        ])
        .map_err(fmt_err)?;
        for r in &self.iterations {
            let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
            let support = r
                .support
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.objective),
                format!("{:e}", r.residual_norm),
                opt(r.rel_error),
                format!("{:e}", r.step),
                r.backtracks.to_string(),
                r.fallback.to_string(),
                format!("{:e}", r.direction_norm),
                r.rank.to_string(),
                r.support.len().to_string(),
                opt(r.mu),
                support,
            ])
            .map_err(fmt_err)?;
        }
        w.flush().map_err(|e| Error::io("trace.csv", e))
    }
}
