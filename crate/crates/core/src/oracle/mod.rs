//! Brute-force references for small instances: the exact projection onto
//! `M_{k,s}` by support enumeration, a search-based row prox, and a solver
//! step carried out entirely in dense arithmetic.

mod reference;
pub mod verify;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use reference::dense_reference_step;

use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::par::{self, Parallelism};
use crate::projection::truncate_rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Largest `C(M, s)` the enumeration will attempt.
    pub max_support_enumeration: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_support_enumeration: 200_000,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[derive(Debug, Clone)]
pub struct ExactProjection {
    pub dense: DMatrix<f64>,
    pub factored: FactoredMatrix,
    /// Maximizing support (size `s`, lexicographically first among ties).
    pub support: SupportSet,
    /// `σ₁² + … + σ_k²` of the selected submatrix.
    pub energy: f64,
    pub candidates: u64,
}

impl ExactProjection {
    pub fn distance(&self, x: &DMatrix<f64>) -> f64 {
        (x - &self.dense).norm()
    }
}

/// Eigenvalues (largest first) and matching orthonormal eigenvectors of a
/// symmetric matrix. Only the lower triangle is read.
///
/// nalgebra's `SymmetricEigen` occasionally returns non-finite eigenvalues
/// for rank-deficient Gram matrices, so faer's solver is used.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = f
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver did not converge on a finite matrix");
    let (u, s) = (eig.U(), eig.S());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    (values, vectors)
}

/// Top-`k` right singular vectors of `a` via the eigendecomposition of `aᵀa`.
pub(crate) fn top_right_vectors(a: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, f64) {
    let (values, vectors) = symmetric_eigen(&(a.transpose() * a));
    let k = k.min(values.len());
    let energy = values.iter().take(k).map(|v| v.max(0.0)).sum();
    (vectors.columns(0, k).into_owned(), energy)
}

/// Sum of the `k` largest squared singular values of the rows `support` of `x`.
fn support_energy(x: &DMatrix<f64>, support: &[usize], k: usize) -> f64 {
    let sub = x.select_rows(support);
    let gram = if sub.nrows() <= sub.ncols() {
        &sub * sub.transpose()
    } else {
        sub.transpose() * &sub
    };
    let (ev, _) = symmetric_eigen(&gram);
    ev.iter().take(k).map(|v| v.max(0.0)).sum()
}

pub fn exact_projection(
    x: &DMatrix<f64>,
    k: usize,
    s: usize,
    budget: OracleBudget,
) -> Result<ExactProjection> {
    exact_projection_with(x, k, s, budget, Parallelism::default())
}

/// Best approximation of `x` in `M_{k,s}` by enumerating every support of
/// size `s`. Refuses, before doing any work, when `C(M, s)` exceeds the budget.
pub fn exact_projection_with(
    x: &DMatrix<f64>,
    k: usize,
    s: usize,
    budget: OracleBudget,
    mode: Parallelism,
) -> Result<ExactProjection> {
    let (rows, cols) = x.shape();
    if k < 1 || k > rows.min(cols) || s < 1 || s > rows {
        return Err(Error::Parameter(format!(
            "exact projection needs 1 <= k <= min(M,N) and 1 <= s <= M, got k = {k}, s = {s}"
        )));
    }
    let needed = binomial(rows, s);
    if needed > budget.max_support_enumeration as u128 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_support_enumeration,
        });
    }

    const CHUNK: usize = 512;
    let chunks: Vec<Vec<Vec<usize>>> = (0..rows)
        .combinations(s)
        .chunks(CHUNK)
        .into_iter()
        .map(|c| c.collect())
        .collect();
    // each chunk is in lexicographic order, and so are the chunks; a strict
    // comparison therefore keeps the first maximizer
    let bests = par::map(chunks, mode, |chunk| {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for cand in chunk {
            let e = support_energy(x, &cand, k);
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, cand));
            }
        }
        best
    });
    let (energy, support) = bests
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one support");

    let sub = x.select_rows(&support);
    let (v, _) = top_right_vectors(&sub, k);
    let block = &sub * &v * v.transpose();
    let mut dense = DMatrix::zeros(rows, cols);
    for (r, &i) in support.iter().enumerate() {
        dense.set_row(i, &block.row(r));
    }

    // no candidate can be closer: ‖X − P‖² = ‖X‖² − energy
    let gap = ((x - &dense).norm_squared() - (x.norm_squared() - energy)).abs();
    if gap > 1e-9 * x.norm_squared().max(1.0) {
        return Err(Error::Numerical(format!(
            "exact projection inconsistent with its energy (gap {gap:e})"
        )));
    }

    Ok(ExactProjection {
        factored: truncate_rank(&dense, k)?,
        dense,
        support: SupportSet::new(support),
        energy,
        candidates: needed as u64,
    })
}

/// Minimizer of `μ‖x‖ + ½‖x − y‖²` over `x = t·y`, `t ∈ [0, 1]`, by a grid
/// search refined twice around the best point.
pub fn exact_prox_rowwise(y: &[f64], mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Parameter(format!("mu must be finite and nonnegative, got {mu}")));
    }
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ny == 0.0 {
        return Ok(vec![0.0; y.len()]);
    }
    let phi = |t: f64| mu * t * ny + 0.5 * (1.0 - t).powi(2) * ny * ny;
    const POINTS: usize = 10_000;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = 0.0;
    for _ in 0..3 {
        let h = (hi - lo) / POINTS as f64;
        let mut best_val = f64::INFINITY;
        for i in 0..=POINTS {
            let t = lo + h * i as f64;
            let v = phi(t);
            if v < best_val {
                best_val = v;
                best = t;
            }
        }
        lo = (best - h).max(0.0);
        hi = (best + h).min(1.0);
    }
    Ok(y.iter().map(|v| best * v).collect())
}
