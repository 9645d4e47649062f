use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::operators::MeasurementOperator;
use crate::tangent::tangent_project;

/// `Q(Z) = D_S(P_T(Z))`: tangent projection at `base` followed by zeroing
/// the rows outside its support.
fn restrict(base: &FactoredMatrix, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut q = tangent_project(base, z)?.densify();
    for i in 0..q.nrows() {
        if !base.support().contains(i) {
            q.row_mut(i).fill(0.0);
        }
    }
    Ok(q)
}

/// `Q (I − A*A) Q` applied to `z`.
pub fn restricted_operator_apply(
    op: &dyn MeasurementOperator,
    base: &FactoredMatrix,
    z: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let qz = restrict(base, z)?;
    let back = op.adjoint(&op.apply(&qz)?)?;
    restrict(base, &(&qz - back))
}

/// Running estimates of `‖Q (I − A*A) Q‖` from power iteration.
///
/// The operator is symmetric, so every `‖B v‖` with `‖v‖ = 1` is a lower
/// bound; the history is the running maximum and therefore nondecreasing.
pub fn restricted_spectral_norm_history(
    op: &dyn MeasurementOperator,
    base: &FactoredMatrix,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if base.rank() == 0 {
        return Err(Error::Parameter(
            "restricted norm needs a base point of positive rank".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(base.rows(), base.cols(), |_, _| {
        StandardNormal.sample(&mut rng)
    });
    let mut v = restrict(base, &g)?;
    let n = v.norm();
    if n == 0.0 {
        return Ok(vec![0.0; iterations.max(1)]);
    }
    v /= n;
    let mut best: f64 = 0.0;
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations.max(1) {
        let w = restricted_operator_apply(op, base, &v)?;
        let est = w.norm();
        if !est.is_finite() {
            return Err(Error::Numerical("power iteration diverged".into()));
        }
        best = best.max(est);
        history.push(best);
        if est == 0.0 {
            break;
        }
        v = w / est;
    }
    Ok(history)
}

pub fn estimate_restricted_spectral_norm(
    op: &dyn MeasurementOperator,
    base: &FactoredMatrix,
    iterations: usize,
) -> Result<f64> {
    let h = restricted_spectral_norm_history(op, base, iterations, 0x5eed)?;
    Ok(h.last().copied().unwrap_or(0.0))
}
