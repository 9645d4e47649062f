use nalgebra::{DMatrix, DVector};

use super::{symmetric_eigen, top_right_vectors};
use crate::error::{Error, Result};
use crate::operators::DenseOperator;
use crate::solvers::{Algorithm, SolverConfig};

/// Orthogonal projector onto the dominant `r`-dimensional eigenspace of a
/// PSD Gram matrix, where `r` counts eigenvalues above a relative cutoff.
fn range_projector(gram: DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let (values, vectors) = symmetric_eigen(&gram);
    let top = values.first().copied().unwrap_or(0.0);
    let mut p = DMatrix::zeros(n, n);
    if top <= 0.0 {
        return p;
    }
    for (i, lam) in values.iter().enumerate() {
        if *lam > top * 1e-12 {
            let c = vectors.column(i);
            p += c * c.transpose();
        }
    }
    p
}

fn row_norm(x: &DMatrix<f64>, i: usize) -> f64 {
    x.row(i).norm()
}

/// `T_k` restricted to rows `keep` (all others zeroed).
fn truncate_on(x: &DMatrix<f64>, keep: &[usize], k: usize) -> DMatrix<f64> {
    let sub = x.select_rows(keep);
    let (v, _) = top_right_vectors(&sub, k);
    let block = &sub * &v * v.transpose();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (r, &i) in keep.iter().enumerate() {
        out.set_row(i, &block.row(r));
    }
    out
}

fn largest_rows(x: &DMatrix<f64>, s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| row_norm(x, b).total_cmp(&row_norm(x, a)).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// One update of `config.algorithm` from `x` at step `alpha`, using only the
/// explicit measurement matrices and dense linear algebra. For RPG, `ell` is
/// the exponent of the threshold decay.
pub fn dense_reference_step(
    op: &DenseOperator,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    config: &SolverConfig,
    alpha: f64,
    ell: usize,
) -> Result<DMatrix<f64>> {
    let d = &config.dims;
    let a = op.as_matrix();
    if x.shape() != (d.rows, d.cols) || y.len() != a.nrows() {
        return Err(Error::Dimension("reference step inputs do not match the operator".into()));
    }
    let mut grad = DMatrix::zeros(d.rows, d.cols);
    for p in 0..a.nrows() {
        let ap = op.measurement_matrix(p);
        let r = ap.component_mul(x).sum() - y[p];
        grad += ap * r;
    }

    let zero = x.iter().all(|v| *v == 0.0);
    let k = d.rank;
    if config.algorithm == Algorithm::Iht || zero {
        let s = match config.algorithm {
            Algorithm::Rpg => config.initial_sparsity(),
            _ => d.sparsity,
        };
        let w = x - grad * alpha;
        return Ok(truncate_on(&w, &largest_rows(&w, s), k));
    }

    let pu = range_projector(x * x.transpose());
    let pv = range_projector(x.transpose() * x);
    let tangent = &pu * &grad + &grad * &pv - &pu * &grad * &pv;
    let w = x - tangent * alpha;
    if config.algorithm == Algorithm::Riht {
        return Ok(truncate_on(&w, &largest_rows(&w, d.sparsity), k));
    }

    let all: Vec<usize> = (0..d.rows).collect();
    let t = truncate_on(&w, &all, k);
    let mut norms: Vec<f64> = (0..d.rows).map(|i| row_norm(&t, i)).collect();
    norms.sort_by(|a, b| b.total_cmp(a));
    let mu = config.rpg_decay.powi(ell as i32) * norms[k - 1];
    let mut out = t.clone();
    for i in 0..d.rows {
        let n = row_norm(&t, i);
        let f = if n > mu { (n - mu) / n } else { 0.0 };
        out.row_mut(i).scale_mut(f);
    }
    Ok(out)
}
