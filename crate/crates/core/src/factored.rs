use nalgebra::{DMatrix, DVector};

use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::svd::ThinSvd;
use crate::ORTHONORMAL_TOL;

/// A rank-`r` matrix `U · diag(sigma) · Vᵀ` with an explicit row support.
///
/// `U` (`M × r`) and `V` (`N × r`) have orthonormal columns, `sigma` is
/// nonnegative and nonincreasing, and every nonzero row of `U` is listed in
/// `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredMatrix {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    support: SupportSet,
}

impl FactoredMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FactoredMatrix {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
            support: SupportSet::default(),
        }
    }

    /// Builds a factorization after checking shapes, ordering and orthonormality.
    pub fn from_parts(
        u: DMatrix<f64>,
        sigma: DVector<f64>,
        v: DMatrix<f64>,
        support: SupportSet,
    ) -> Result<Self> {
        let r = sigma.len();
        if u.ncols() != r || v.ncols() != r {
            return Err(Error::Dimension(format!(
                "factor widths U: {}, V: {} do not match {} singular values",
                u.ncols(),
                v.ncols(),
                r
            )));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0)
            || sigma.as_slice().windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::Parameter(
                "singular values must be finite, nonnegative and nonincreasing".into(),
            ));
        }
        if let Some(&bad) = support.indices().iter().find(|&&i| i >= u.nrows()) {
            return Err(Error::Dimension(format!(
                "support index {bad} out of range for {} rows",
                u.nrows()
            )));
        }
        for i in 0..u.nrows() {
            if !support.contains(i) && u.row(i).iter().any(|x| *x != 0.0) {
                return Err(Error::Parameter(format!("row {i} of U is nonzero but not in the support")));
            }
        }
        let x = FactoredMatrix { u, sigma, v, support };
        let defect = x.orthonormality_defect();
        if defect > ORTHONORMAL_TOL * (r.max(1) as f64) {
            return Err(Error::Numerical(format!(
                "factor columns not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(x)
    }

    pub(crate) fn from_parts_unchecked(
        u: DMatrix<f64>,
        sigma: DVector<f64>,
        v: DMatrix<f64>,
        support: SupportSet,
    ) -> Self {
        debug_assert_eq!(u.ncols(), sigma.len());
        debug_assert_eq!(v.ncols(), sigma.len());
        FactoredMatrix { u, sigma, v, support }
    }

    /// Lifts an SVD of the submatrix formed by `support` rows back to `rows` rows.
    pub(crate) fn embed_rows(svd: ThinSvd, support: SupportSet, rows: usize) -> Self {
        debug_assert_eq!(svd.u.nrows(), support.len());
        let r = svd.rank();
        let mut u = DMatrix::zeros(rows, r);
        for (local, global) in support.iter().enumerate() {
            u.row_mut(global).copy_from(&svd.u.row(local));
        }
        FactoredMatrix {
            u,
            sigma: svd.sigma,
            v: svd.v,
            support,
        }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of retained singular triplets.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    /// `U · diag(sigma)`.
    pub fn scaled_left(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us
    }

    pub fn densify(&self) -> DMatrix<f64> {
        self.scaled_left() * self.v.transpose()
    }

    /// Euclidean row norms, computed from `U · diag(sigma)` since `V` is orthonormal.
    pub fn row_norms(&self) -> Vec<f64> {
        let us = self.scaled_left();
        (0..us.nrows()).map(|i| us.row(i).norm()).collect()
    }

    /// Indices of rows that are not exactly zero.
    pub fn nonzero_rows(&self) -> SupportSet {
        self.support
            .iter()
            .filter(|&i| !self.sigma.is_empty() && self.u.row(i).iter().any(|x| *x != 0.0))
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.norm()
    }

    /// `‖self − other‖_F` without forming `M × N` matrices.
    pub fn distance(&self, other: &FactoredMatrix) -> f64 {
        let (r1, r2) = (self.rank(), other.rank());
        if r1 + r2 == 0 {
            return 0.0;
        }
        let mut us = DMatrix::zeros(self.rows(), r1 + r2);
        us.columns_mut(0, r1).copy_from(&self.u);
        us.columns_mut(r1, r2).copy_from(&other.u);
        let mut vs = DMatrix::zeros(self.cols(), r1 + r2);
        vs.columns_mut(0, r1).copy_from(&self.v);
        vs.columns_mut(r1, r2).copy_from(&other.v);
        let mut diag = DVector::zeros(r1 + r2);
        diag.rows_mut(0, r1).copy_from(&self.sigma);
        diag.rows_mut(r1, r2).copy_from(&(-&other.sigma));
        let ru = us.qr().r();
        let rv = vs.qr().r();
        (ru * DMatrix::from_diagonal(&diag) * rv.transpose()).norm()
    }

    /// `max(‖UᵀU − I‖_F, ‖VᵀV − I‖_F)`.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = self.rank();
        let eye = DMatrix::<f64>::identity(r, r);
        let du = (self.u.transpose() * &self.u - &eye).norm();
        let dv = (self.v.transpose() * &self.v - &eye).norm();
        du.max(dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svd::thin_svd;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, 0.0, 0.0, 0.0, -1.0, 0.3, 2.0, 0.7, 0.1, -0.4])
    }

    #[test]
    fn densify_reproduces_input() {
        let x = sample();
        let f = FactoredMatrix::embed_rows(thin_svd(&x).unwrap(), SupportSet::full(4), 4);
        assert!((f.densify() - &x).norm() < 1e-13);
        assert!(f.orthonormality_defect() < 1e-13);
        let norms = f.row_norms();
        for i in 0..4 {
            assert!((norms[i] - x.row(i).norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn distance_matches_dense() {
        let x = sample();
        let a = FactoredMatrix::embed_rows(thin_svd(&x).unwrap().truncate(1), SupportSet::full(4), 4);
        let b = FactoredMatrix::embed_rows(thin_svd(&x).unwrap(), SupportSet::full(4), 4);
        let dense = (a.densify() - b.densify()).norm();
        assert!((a.distance(&b) - dense).abs() < 1e-13);
        assert!(a.distance(&FactoredMatrix::zeros(4, 3)) - a.frobenius_norm() < 1e-13);
    }

    #[test]
    fn from_parts_checks_support() {
        let u = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let sigma = DVector::from_vec(vec![2.0]);
        assert!(FactoredMatrix::from_parts(u.clone(), sigma.clone(), v.clone(), SupportSet::new(vec![0])).is_ok());
        assert!(FactoredMatrix::from_parts(u, sigma, v, SupportSet::new(vec![1])).is_err());
    }
}
