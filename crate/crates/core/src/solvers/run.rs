use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::armijo::armijo_search;
use super::record::{IterationRecord, RunRecord, Termination};
use super::{Algorithm, SolverConfig, StepRule};
use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::operators::MeasurementOperator;
use crate::projection::quasi_proj_ks;
use crate::tangent::RetractionBasis;

/// A prepared update: every trial step `α` of the line search reuses the
/// gradient (or the retraction basis) computed once per iteration.
enum Direction {
    /// `P(X − α ∇f)` with `P = T_k ∘ H_s`.
    Dense {
        x: DMatrix<f64>,
        grad: DMatrix<f64>,
        sparsity: usize,
    },
    /// `T_k ∘ H_s(R_X(−α ξ))`, or plain `T_k` for the proximal method.
    Riemannian {
        basis: RetractionBasis,
        sparsity: Option<usize>,
    },
}

impl Direction {
    fn trial(&self, alpha: f64, k: usize) -> Result<FactoredMatrix> {
        match self {
            Direction::Dense { x, grad, sparsity } => {
                quasi_proj_ks(&(x - grad * alpha), k, *sparsity)
            }
            Direction::Riemannian {
                basis,
                sparsity: Some(s),
            } => basis.retract(alpha).quasi_proj_ks(k, *s),
            Direction::Riemannian {
                basis,
                sparsity: None,
            } => basis.retract(alpha).truncate_rank(k),
        }
    }

    fn is_proximal(&self) -> bool {
        matches!(self, Direction::Riemannian { sparsity: None, .. })
    }
}

struct Engine<'a> {
    op: &'a dyn MeasurementOperator,
    y: &'a DVector<f64>,
    y_norm: f64,
    config: &'a SolverConfig,
}

struct Update {
    point: FactoredMatrix,
    residual: DVector<f64>,
    objective: f64,
    step: f64,
    backtracks: usize,
    fallback: bool,
    direction_norm: f64,
    mu: Option<f64>,
    kth_row_norm: Option<f64>,
}

impl Engine<'_> {
    fn residual(&self, x: &FactoredMatrix) -> Result<DVector<f64>> {
        Ok(self.op.apply_factored(x)? - self.y)
    }

    /// Iterates of rank 0 (the zero start, or a collapse) have no tangent
    /// space to work in; they take a full-gradient step instead. For RPG this
    /// is the initialization `T_k ∘ H_{s₀}(α A*(y))`.
    fn direction(&self, x: &FactoredMatrix, residual: &DVector<f64>) -> Result<(Direction, f64)> {
        let d = &self.config.dims;
        let alg = self.config.algorithm;
        if alg == Algorithm::Iht || x.rank() == 0 {
            let grad = self.op.gradient(residual, self.y_norm)?;
            let norm = grad.norm();
            let sparsity = match alg {
                Algorithm::Rpg => self.config.initial_sparsity(),
                _ => d.sparsity,
            };
            return Ok((
                Direction::Dense {
                    x: x.densify(),
                    grad,
                    sparsity,
                },
                norm,
            ));
        }
        let xi = self.op.projected_gradient(x, residual, self.y_norm)?;
        let norm = xi.norm();
        let sparsity = (alg == Algorithm::Riht).then_some(d.sparsity);
        Ok((
            Direction::Riemannian {
                basis: xi.retraction_basis(),
                sparsity,
            },
            norm,
        ))
    }

    /// Row soft-thresholding at `μ = τ^ℓ · (k-th largest row norm)`.
    fn prox(&self, point: &FactoredMatrix, ell: usize) -> Result<(FactoredMatrix, f64, f64)> {
        let k = self.config.dims.rank;
        let mut norms = point.row_norms();
        norms.sort_by(|a, b| b.total_cmp(a));
        let kth = norms.get(k - 1).copied().unwrap_or(0.0);
        let mu = self.config.rpg_decay.powi(ell as i32) * kth;
        Ok((point.soft_threshold_rows(mu)?, mu, kth))
    }

    fn update(
        &self,
        x: &FactoredMatrix,
        residual: &DVector<f64>,
        objective: f64,
        ell: usize,
    ) -> Result<Update> {
        let k = self.config.dims.rank;
        let (dir, direction_norm) = self.direction(x, residual)?;
        let trial = |alpha: f64| -> Result<(f64, (FactoredMatrix, DVector<f64>))> {
            let p = dir.trial(alpha, k)?;
            let r = self.residual(&p)?;
            Ok((0.5 * r.norm_squared(), (p, r)))
        };
        let (step, backtracks, fallback, f_new, (point, r)) = match self.config.step {
            StepRule::Constant { alpha } => {
                let (f, t) = trial(alpha)?;
                (alpha, 0, false, f, t)
            }
            StepRule::Armijo {
                beta,
                gamma,
                max_backtracks,
            } => {
                let out = armijo_search(
                    objective,
                    direction_norm * direction_norm,
                    beta,
                    gamma,
                    max_backtracks,
                    trial,
                )?;
                (out.alpha, out.backtracks, out.fallback, out.objective, out.trial)
            }
        };
        let mut upd = Update {
            point,
            residual: r,
            objective: f_new,
            step,
            backtracks,
            fallback,
            direction_norm,
            mu: None,
            kth_row_norm: None,
        };
        if dir.is_proximal() {
            let (p, mu, kth) = self.prox(&upd.point, ell)?;
            upd.residual = self.residual(&p)?;
            upd.objective = 0.5 * upd.residual.norm_squared();
            upd.point = p;
            upd.mu = Some(mu);
            upd.kth_row_norm = Some(kth);
        }
        if !upd.objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite (step {step})"
            )));
        }
        Ok(upd)
    }
}

type Observer<'a> = Box<dyn FnMut(&IterationRecord) + 'a>;

/// One solver run. Starts from `X = 0` unless a start point is given.
pub struct Solver<'a> {
    op: &'a dyn MeasurementOperator,
    y: &'a DVector<f64>,
    config: SolverConfig,
    truth: Option<&'a FactoredMatrix>,
    start: Option<FactoredMatrix>,
    observer: Option<Observer<'a>>,
}

impl<'a> Solver<'a> {
    pub fn new(op: &'a dyn MeasurementOperator, y: &'a DVector<f64>, config: SolverConfig) -> Self {
        Solver {
            op,
            y,
            config,
            truth: None,
            start: None,
            observer: None,
        }
    }

    /// Enables relative-error tracking (and `error_tol` stopping).
    pub fn with_truth(mut self, truth: &'a FactoredMatrix) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_start(mut self, start: FactoredMatrix) -> Self {
        self.start = Some(start);
        self
    }

    /// Called with every record as soon as it is produced.
    pub fn with_observer(mut self, f: impl FnMut(&IterationRecord) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    fn check_inputs(&self) -> Result<()> {
        self.config.validate()?;
        let d = &self.config.dims;
        if self.op.shape() != (d.rows, d.cols) || self.op.num_measurements() != d.measurements {
            return Err(Error::Dimension(format!(
                "operator is {:?} with m = {}, problem is {}x{} with m = {}",
                self.op.shape(),
                self.op.num_measurements(),
                d.rows,
                d.cols,
                d.measurements
            )));
        }
        if self.y.len() != self.op.output_len() {
            return Err(Error::Dimension(format!(
                "measurement vector has length {}, operator produces {}",
                self.y.len(),
                self.op.output_len()
            )));
        }
        for (what, m) in [("ground truth", self.truth), ("start point", self.start.as_ref())] {
            if let Some(m) = m {
                if (m.rows(), m.cols()) != (d.rows, d.cols) {
                    return Err(Error::Dimension(format!(
                        "{what} is {}x{}, expected {}x{}",
                        m.rows(),
                        m.cols(),
                        d.rows,
                        d.cols
                    )));
                }
            }
        }
        if !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("measurements contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<RunRecord> {
        self.check_inputs()?;
        let config = self.config.clone();
        let engine = Engine {
            op: self.op,
            y: self.y,
            y_norm: self.y.norm(),
            config: &config,
        };
        let truth = self.truth;
        let truth_norm = truth.map(|t| t.frobenius_norm());
        let rel_error = |x: &FactoredMatrix| -> Option<f64> {
            let (t, n) = (truth?, truth_norm?);
            Some(if n > 0.0 { x.distance(t) / n } else { x.frobenius_norm() })
        };
        let y_norm = self.y.norm();
        let k = config.dims.rank;
        let converged = |rec: &IterationRecord, stable: usize| -> bool {
            if y_norm == 0.0 && rec.residual_norm == 0.0 {
                return true;
            }
            let hit = rec.residual_norm <= config.residual_tol * y_norm
                || matches!((config.error_tol, rec.rel_error), (Some(t), Some(e)) if e <= t);
            hit && (config.algorithm != Algorithm::Rpg || stable >= config.support_stability)
        };

        let mut x = self
            .start
            .take()
            .unwrap_or_else(|| FactoredMatrix::zeros(config.dims.rows, config.dims.cols));
        let mut residual = engine.residual(&x)?;
        let mut objective = 0.5 * residual.norm_squared();
        // proximal updates taken so far
        let mut ell = 0usize;
        let mut support = Arc::new(x.support().clone());
        let mut stable = 0usize;

        let first = IterationRecord {
            iteration: 0,
            objective,
            residual_norm: residual.norm(),
            rel_error: rel_error(&x),
            step: 0.0,
            backtracks: 0,
            fallback: false,
            direction_norm: 0.0,
            support: Arc::clone(&support),
            rank: x.rank(),
            mu: None,
            kth_row_norm: None,
            rank_deficient: false,
        };
        if let Some(obs) = self.observer.as_mut() {
            obs(&first);
        }
        let mut termination = if converged(&first, stable) {
            Some(Termination::Converged)
        } else {
            None
        };
        let mut records = vec![first];

        let mut iteration = 0;
        while termination.is_none() {
            if iteration >= config.max_iter {
                termination = Some(Termination::MaxIter);
                break;
            }
            iteration += 1;
            let rank_deficient = x.rank() > 0 && x.rank() < k && config.algorithm != Algorithm::Iht;
            let upd = match engine.update(&x, &residual, objective, ell + 1) {
                Ok(u) => u,
                Err(e) => {
                    termination = Some(Termination::NumericalError(e.to_string()));
                    break;
                }
            };
            if upd.mu.is_some() {
                ell += 1;
            }
            x = upd.point;
            residual = upd.residual;
            objective = upd.objective;
            if *support == *x.support() {
                stable += 1;
            } else {
                support = Arc::new(x.support().clone());
                stable = 0;
            }
            let rec = IterationRecord {
                iteration,
                objective,
                residual_norm: residual.norm(),
                rel_error: rel_error(&x),
                step: upd.step,
                backtracks: upd.backtracks,
                fallback: upd.fallback,
                direction_norm: upd.direction_norm,
                support: Arc::clone(&support),
                rank: x.rank(),
                mu: upd.mu,
                kth_row_norm: upd.kth_row_norm,
                rank_deficient,
            };
            if let Some(obs) = self.observer.as_mut() {
                obs(&rec);
            }
            if converged(&rec, stable) {
                termination = Some(Termination::Converged);
            }
            records.push(rec);
        }

        Ok(RunRecord {
            algorithm: config.algorithm,
            iterations: records,
            final_iterate: x,
            termination: termination.unwrap_or(Termination::MaxIter),
        })
    }
}

pub fn solve(op: &dyn MeasurementOperator, y: &DVector<f64>, config: SolverConfig) -> Result<RunRecord> {
    Solver::new(op, y, config).run()
}

fn run_as(
    expected: Algorithm,
    op: &dyn MeasurementOperator,
    y: &DVector<f64>,
    config: SolverConfig,
) -> Result<RunRecord> {
    if config.algorithm != expected {
        return Err(Error::Parameter(format!(
            "{expected} run requested with a {} configuration",
            config.algorithm
        )));
    }
    solve(op, y, config)
}

pub fn iht_run(op: &dyn MeasurementOperator, y: &DVector<f64>, config: SolverConfig) -> Result<RunRecord> {
    run_as(Algorithm::Iht, op, y, config)
}

pub fn riht_run(op: &dyn MeasurementOperator, y: &DVector<f64>, config: SolverConfig) -> Result<RunRecord> {
    run_as(Algorithm::Riht, op, y, config)
}

pub fn rpg_run(op: &dyn MeasurementOperator, y: &DVector<f64>, config: SolverConfig) -> Result<RunRecord> {
    run_as(Algorithm::Rpg, op, y, config)
}

/// A single update from `x` at a fixed step `alpha`, ignoring `config.step`.
/// For RPG, `ell` is the exponent in `μ = τ^ℓ · (k-th row norm)`.
pub fn fixed_step(
    op: &dyn MeasurementOperator,
    y: &DVector<f64>,
    config: &SolverConfig,
    x: &FactoredMatrix,
    alpha: f64,
    ell: usize,
) -> Result<FactoredMatrix> {
    config.validate()?;
    let engine = Engine { op, y, y_norm: y.norm(), config };
    let residual = engine.residual(x)?;
    let (dir, _) = engine.direction(x, &residual)?;
    let point = dir.trial(alpha, config.dims.rank)?;
    if dir.is_proximal() {
        Ok(engine.prox(&point, ell)?.0)
    } else {
        Ok(point)
    }
}

/// Support of the iterate after each update (record 0 excluded).
pub fn support_history(run: &RunRecord) -> Vec<Arc<SupportSet>> {
    run.iterations.iter().skip(1).map(|r| Arc::clone(&r.support)).collect()
}
