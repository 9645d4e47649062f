//! Iterative hard thresholding (IHT), Riemannian IHT (RIHT) and the
//! Riemannian proximal gradient method (RPG).

mod armijo;
mod diagnostics;
mod record;
mod run;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use armijo::{armijo_search, ArmijoOutcome};
pub use diagnostics::{
    estimate_restricted_spectral_norm, restricted_operator_apply, restricted_spectral_norm_history,
};
pub use record::{IterationRecord, RunRecord, Termination};
pub use run::{fixed_step, iht_run, riht_run, rpg_run, solve, support_history, Solver};

use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::operators::MeasurementOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Iht,
    Riht,
    Rpg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Iht => "iht",
            Algorithm::Riht => "riht",
            Algorithm::Rpg => "rpg",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iht" => Ok(Algorithm::Iht),
            "riht" => Ok(Algorithm::Riht),
            "rpg" => Ok(Algorithm::Rpg),
            other => Err(Error::Parameter(format!(
                "unknown algorithm '{other}' (expected iht, riht or rpg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepRule {
    Constant {
        alpha: f64,
    },
    /// `α = β^p` for the smallest `p ≤ max_backtracks` passing the sufficient
    /// decrease test; `α = 1` if none does.
    Armijo {
        beta: f64,
        gamma: f64,
        max_backtracks: usize,
    },
}

impl StepRule {
    pub const fn armijo() -> Self {
        StepRule::Armijo {
            beta: 0.5,
            gamma: 1e-4,
            max_backtracks: 50,
        }
    }

    pub const fn unit() -> Self {
        StepRule::Constant { alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Constant { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::Parameter(format!("constant step must be positive, got {alpha}")),
            ),
            StepRule::Armijo {
                beta,
                gamma,
                max_backtracks,
            } if !(beta > 0.0 && beta < 1.0) || !(gamma > 0.0) || max_backtracks < 1 => {
                Err(Error::Parameter(format!(
                    "Armijo needs beta in (0,1), gamma > 0, max_backtracks >= 1; \
                     got beta = {beta}, gamma = {gamma}, max_backtracks = {max_backtracks}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub dims: ProblemDims,
    pub step: StepRule,
    pub max_iter: usize,
    /// Converged once `‖A(X) − y‖ ≤ residual_tol · ‖y‖`.
    pub residual_tol: f64,
    /// Converged once the relative error drops below this (needs ground truth).
    pub error_tol: Option<f64>,
    /// RPG threshold decay `τ`.
    pub rpg_decay: f64,
    /// RPG initial sparsity `s₀`; defaults to `min(M, (m + k(k − N))/k)`.
    pub rpg_initial_sparsity: Option<usize>,
    /// RPG also requires the support to stay fixed this many iterations.
    pub support_stability: usize,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, dims: ProblemDims) -> Self {
        SolverConfig {
            algorithm,
            dims,
            step: StepRule::armijo(),
            max_iter: match algorithm {
                Algorithm::Rpg => 20_000,
                _ => 5_000,
            },
            residual_tol: 1e-6,
            error_tol: None,
            rpg_decay: 0.99,
            rpg_initial_sparsity: None,
            support_stability: 25,
        }
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_error_tol(mut self, tol: Option<f64>) -> Self {
        self.error_tol = tol;
        self
    }

    pub fn with_rpg_decay(mut self, tau: f64) -> Self {
        self.rpg_decay = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.step.validate()?;
        if !(self.rpg_decay > 0.0 && self.rpg_decay < 1.0) {
            return Err(Error::Parameter(format!(
                "RPG decay tau must lie in (0,1), got {}",
                self.rpg_decay
            )));
        }
        if let Some(s0) = self.rpg_initial_sparsity {
            if s0 < 1 || s0 > self.dims.rows {
                return Err(Error::Parameter(format!(
                    "initial sparsity s0 = {s0} must lie in 1..={}",
                    self.dims.rows
                )));
            }
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::Parameter("residual tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    /// `s₀`: the configured value, or the largest row sparsity the measurement
    /// count can identify, `min(M, (m + k(k − N))/k)`, clamped to `[k, M]`.
    pub fn initial_sparsity(&self) -> usize {
        let d = &self.dims;
        self.rpg_initial_sparsity.unwrap_or_else(|| {
            let (m, k, n) = (d.measurements as i64, d.rank as i64, d.cols as i64);
            let dof = (m + k * (k - n)) / k;
            dof.clamp(d.rank as i64, d.rows as i64) as usize
        })
    }
}

/// `½ ‖A(X) − y‖²`.
pub fn objective(op: &dyn MeasurementOperator, x: &FactoredMatrix, y: &DVector<f64>) -> Result<f64> {
    Ok(0.5 * (op.apply_factored(x)? - y).norm_squared())
}

pub fn objective_dense(op: &dyn MeasurementOperator, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(0.5 * (op.apply(x)? - y).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::make_gaussian;
    use crate::projection::truncate_rank;

    #[test]
    fn objective_examples() {
        let d = ProblemDims::new(6, 4, 1, 2, 10).unwrap();
        let op = make_gaussian(&d, 4);
        let x = DMatrix::from_fn(6, 4, |i, j| if i < 2 { (i + j) as f64 } else { 0.0 });
        let xf = truncate_rank(&x, 2).unwrap();
        let y = op.apply(&x).unwrap();
        assert!(objective(&op, &xf, &y).unwrap() < 1e-20);
        let zero = FactoredMatrix::zeros(6, 4);
        assert!((objective(&op, &zero, &y).unwrap() - 0.5 * y.norm_squared()).abs() < 1e-12);
        let z = DVector::from_fn(10, |p, _| p as f64 * 0.1);
        let direct: f64 = (0..10)
            .map(|p| {
                let a = op.measurement_matrix(p);
                let inner: f64 = a.iter().zip(x.iter()).map(|(u, v)| u * v).sum();
                (inner - z[p]).powi(2)
            })
            .sum::<f64>()
            * 0.5;
        assert!((objective_dense(&op, &x, &z).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn step_rule_validation() {
        assert!(StepRule::armijo().validate().is_ok());
        assert!(StepRule::Constant { alpha: 0.0 }.validate().is_err());
        let bad = StepRule::Armijo { beta: 1.0, gamma: 1e-4, max_backtracks: 5 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_initial_sparsity() {
        let d = ProblemDims::new(150, 50, 1, 3, 200).unwrap();
        assert_eq!(SolverConfig::new(Algorithm::Rpg, d).initial_sparsity(), 150);
        let d = ProblemDims::new(1000, 10, 3, 20, 120).unwrap();
        // (120 + 3·(3 − 10)) / 3 = 33
        assert_eq!(SolverConfig::new(Algorithm::Rpg, d).initial_sparsity(), 33);
    }
}
