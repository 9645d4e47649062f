//! Row hard thresholding `H_s`, rank truncation `T_k`, the two composite
//! quasi-projections onto `M_{k,s}` and row-wise soft thresholding.

use nalgebra::DMatrix;

use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::svd::thin_svd;

pub fn row_norms(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| x.row(i).norm()).collect()
}

/// The `s` indices with the largest norms. Equal norms keep the lower index.
pub fn largest_rows(norms: &[f64], s: usize) -> SupportSet {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(s);
    SupportSet::new(order)
}

fn check_sparsity(s: usize, rows: usize) -> Result<()> {
    if s < 1 || s > rows {
        return Err(Error::Parameter(format!(
            "row sparsity s = {s} must lie in 1..={rows}"
        )));
    }
    Ok(())
}

fn check_rank(k: usize, rows: usize, cols: usize) -> Result<()> {
    if k < 1 || k > rows.min(cols) {
        return Err(Error::Parameter(format!(
            "rank k = {k} must lie in 1..={}",
            rows.min(cols)
        )));
    }
    Ok(())
}

fn select_rows(x: &DMatrix<f64>, support: &SupportSet) -> DMatrix<f64> {
    x.select_rows(support.indices())
}

/// `H_s`: keeps the `s` rows of largest Euclidean norm and zeroes the rest.
pub fn hard_threshold_rows(x: &DMatrix<f64>, s: usize) -> Result<(DMatrix<f64>, SupportSet)> {
    check_sparsity(s, x.nrows())?;
    let support = largest_rows(&row_norms(x), s);
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in support.iter() {
        out.row_mut(i).copy_from(&x.row(i));
    }
    Ok((out, support))
}

/// `T_k`: best rank-`k` approximation. The support is the set of nonzero rows of `x`.
pub fn truncate_rank(x: &DMatrix<f64>, k: usize) -> Result<FactoredMatrix> {
    check_rank(k, x.nrows(), x.ncols())?;
    let support: SupportSet = (0..x.nrows())
        .filter(|&i| x.row(i).iter().any(|v| *v != 0.0))
        .collect();
    let svd = thin_svd(&select_rows(x, &support))?.truncate(k);
    Ok(FactoredMatrix::embed_rows(svd, support, x.nrows()))
}

/// `P_{k,s} = T_k ∘ H_s`: rank truncation of the `s × N` submatrix of largest rows.
pub fn quasi_proj_ks(x: &DMatrix<f64>, k: usize, s: usize) -> Result<FactoredMatrix> {
    check_rank(k, x.nrows(), x.ncols())?;
    check_sparsity(s, x.nrows())?;
    let support = largest_rows(&row_norms(x), s);
    let svd = thin_svd(&select_rows(x, &support))?.truncate(k);
    Ok(FactoredMatrix::embed_rows(svd, support, x.nrows()))
}

/// `P̂_{k,s} = H_s ∘ T_k`: row thresholding of the best rank-`k` approximation.
pub fn quasi_proj_hat_ks(x: &DMatrix<f64>, k: usize, s: usize) -> Result<FactoredMatrix> {
    check_rank(k, x.nrows(), x.ncols())?;
    check_sparsity(s, x.nrows())?;
    let tk = thin_svd(x)?.truncate(k);
    let mut left = tk.u;
    for (j, sv) in tk.sigma.iter().enumerate() {
        left.column_mut(j).scale_mut(*sv);
    }
    let support = largest_rows(&row_norms(&left), s);
    refactor_rows(&left, &tk.v, support, k)
}

/// Factors `L · Wᵀ` (with `W` orthonormal) restricted to `support` rows of `L`.
///
/// Rows of `L` outside `support` are treated as zero.
pub(crate) fn refactor_rows(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    support: SupportSet,
    k: usize,
) -> Result<FactoredMatrix> {
    let svd = thin_svd(&left.select_rows(support.indices()))?.truncate(k);
    let v = right * &svd.v;
    let svd = crate::svd::ThinSvd { v, ..svd };
    Ok(FactoredMatrix::embed_rows(svd, support, left.nrows()))
}

/// Row scale factors `max(0, (‖y_i‖ − μ) / ‖y_i‖)`; rows with `‖y_i‖ ≤ μ` get 0.
fn shrink_factors(norms: &[f64], mu: f64) -> Vec<f64> {
    norms
        .iter()
        .map(|&n| if n > mu { (n - mu) / n } else { 0.0 })
        .collect()
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Parameter(format!(
            "soft-threshold level must be finite and nonnegative, got {mu}"
        )));
    }
    Ok(())
}

/// `S^μ_{1,2}`: row-wise soft thresholding, the prox of `μ‖·‖_{1,2}`.
pub fn soft_threshold_rows(x: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    check_mu(mu)?;
    let factors = shrink_factors(&row_norms(x), mu);
    let mut out = x.clone();
    for (i, f) in factors.into_iter().enumerate() {
        out.row_mut(i).scale_mut(f);
    }
    Ok(out)
}

impl FactoredMatrix {
    /// Soft thresholding of the rows of `U · diag(sigma)`, re-compacted.
    /// The rank never increases; zeroed rows leave the support.
    pub fn soft_threshold_rows(&self, mu: f64) -> Result<FactoredMatrix> {
        check_mu(mu)?;
        let mut left = self.scaled_left();
        let factors = shrink_factors(&self.row_norms(), mu);
        for (i, f) in factors.iter().enumerate() {
            left.row_mut(i).scale_mut(*f);
        }
        let support: SupportSet = self
            .support()
            .iter()
            .filter(|&i| factors[i] > 0.0)
            .collect();
        refactor_rows(&left, self.v(), support, self.rank())
    }
}
