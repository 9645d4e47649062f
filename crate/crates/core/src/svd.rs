//! Deterministic thin SVD with a fixed sign convention.
//!
//! Only small matrices (`s × N`, `2k × 2k`, ...) go through here, so the
//! dense routine of `faer` is used directly. No randomized sketching.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries below this magnitude are skipped when fixing column signs.
const SIGN_PIVOT_TOL: f64 = 1e-12;

/// `a = u · diag(sigma) · vᵀ` with `sigma` nonincreasing and the first
/// significant entry of every column of `u` nonnegative.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` triplets, dropping numerically zero singular values.
    pub fn truncate(self, k: usize) -> ThinSvd {
        let cutoff = numerical_zero(&self.sigma, self.u.nrows().max(self.v.nrows()));
        let keep = self
            .sigma
            .iter()
            .take(k)
            .take_while(|&&s| s > cutoff)
            .count();
        ThinSvd {
            u: self.u.columns(0, keep).into_owned(),
            sigma: self.sigma.rows(0, keep).into_owned(),
            v: self.v.columns(0, keep).into_owned(),
        }
    }
}

fn numerical_zero(sigma: &DVector<f64>, dim: usize) -> f64 {
    let top = sigma.iter().copied().fold(0.0_f64, f64::max);
    top * (dim.max(1) as f64) * f64::EPSILON
}

pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite entry in {rows}x{cols} matrix passed to SVD"
        )));
    }
    // nalgebra's implicit-shift SVD returns wrong factors for some rank-deficient
    // inputs, so the decomposition itself comes from faer.
    let f = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = f.thin_svd().map_err(|e| {
        Error::Numerical(format!(
            "SVD of {rows}x{cols} matrix did not converge ({e:?}, Frobenius norm {:.3e})",
            a.norm()
        ))
    })?;
    let r = rows.min(cols);
    let (fu, fs, fv) = (svd.U(), svd.S(), svd.V());
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| fs[j].total_cmp(&fs[i]).then(i.cmp(&j)));
    let mut u = DMatrix::from_fn(rows, r, |i, j| fu[(i, order[j])]);
    let mut v = DMatrix::from_fn(cols, r, |i, j| fv[(i, order[j])]);
    let sigma = DVector::from_fn(r, |j, _| fs[order[j]].max(0.0));
    for j in 0..r {
        let pivot = u.column(j).iter().copied().find(|x| x.abs() > SIGN_PIVOT_TOL);
        if matches!(pivot, Some(p) if p < 0.0) {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok(ThinSvd { u, sigma, v })
}
