use nalgebra::{DMatrix, DVector};

use super::{
    check_factored, check_matrix, check_measurements, normal_matrix, rng, rowwise_dot, scale_rows,
    BackendKind, DenseOperator, MeasurementOperator,
};
use crate::dims::ProblemDims;
use crate::error::Result;
use crate::factored::FactoredMatrix;
use crate::tangent::TangentVector;

/// Measurements `y_p = a_pᵀ X b_p`. Row `p` of `left` is `a_pᵀ`, row `p` of
/// `right` is `b_pᵀ`.
#[derive(Debug, Clone)]
pub struct RankOneOperator {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl RankOneOperator {
    pub fn new(left: DMatrix<f64>, right: DMatrix<f64>) -> Self {
        assert_eq!(left.nrows(), right.nrows(), "a- and b-vectors must pair up");
        RankOneOperator { left, right }
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }
}

pub(super) fn random(rows: usize, cols: usize, m: usize, seed: u64) -> RankOneOperator {
    let mut rng = rng(seed);
    let left = normal_matrix(&mut rng, m, rows, 1.0);
    let right = normal_matrix(&mut rng, m, cols, 1.0 / (m as f64).sqrt());
    RankOneOperator { left, right }
}

/// `a_p ~ N(0, 1)`, `b_p ~ N(0, 1/m)` entrywise.
pub fn make_rank_one(dims: &ProblemDims, seed: u64) -> RankOneOperator {
    random(dims.rows, dims.cols, dims.measurements, seed)
}

impl MeasurementOperator for RankOneOperator {
    fn kind(&self) -> BackendKind {
        BackendKind::RankOne
    }

    fn shape(&self) -> (usize, usize) {
        (self.left.ncols(), self.right.ncols())
    }

    fn num_measurements(&self) -> usize {
        self.left.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_matrix(self, x)?;
        Ok(rowwise_dot(&(&self.left * x), &self.right, None))
    }

    /// `Σ_j σ_j (a_pᵀ u_j)(v_jᵀ b_p)` over the support rows only: `O(m·r·(s+N))`.
    fn apply_factored(&self, x: &FactoredMatrix) -> Result<DVector<f64>> {
        check_factored(self, x)?;
        if x.rank() == 0 {
            return Ok(DVector::zeros(self.num_measurements()));
        }
        let rows = x.support().indices();
        let au = self.left.select_columns(rows) * x.u().select_rows(rows);
        let bv = &self.right * x.v();
        Ok(rowwise_dot(&au, &bv, Some(x.sigma())))
    }

    fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_measurements(self, z)?;
        Ok(self.left.transpose() * scale_rows(&self.right, z.as_slice()))
    }

    /// Only the bracketed `M × r` and `N × r` sums are formed: `O(m·r·(M+N))`.
    fn projected_adjoint(&self, base: &FactoredMatrix, z: &DVector<f64>) -> Result<TangentVector> {
        check_factored(self, base)?;
        check_measurements(self, z)?;
        let w = z.as_slice();
        let z_v = self.left.tr_mul(&scale_rows(&(&self.right * base.v()), w));
        let zt_u = self.right.tr_mul(&scale_rows(&(&self.left * base.u()), w));
        TangentVector::from_products(base, z_v, zt_u)
    }

    fn to_dense(&self) -> DenseOperator {
        let mats: Vec<DMatrix<f64>> = (0..self.num_measurements())
            .map(|p| self.left.row(p).transpose() * self.right.row(p))
            .collect();
        DenseOperator::from_matrices(BackendKind::Dense, &mats).expect("finite rank-one factors")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_measurement_picks_product() {
        let d = ProblemDims::new(5, 3, 1, 2, 7).unwrap();
        let op = make_rank_one(&d, 3);
        let mut x = DMatrix::zeros(5, 3);
        x[(0, 0)] = 1.0;
        let y = op.apply(&x).unwrap();
        for p in 0..7 {
            assert!((y[p] - op.left()[(p, 0)] * op.right()[(p, 0)]).abs() < 1e-15);
        }
    }

    #[test]
    fn adjoint_of_unit_vector_is_outer_product() {
        let d = ProblemDims::new(5, 3, 1, 2, 7).unwrap();
        let op = make_rank_one(&d, 3);
        let mut e = DVector::zeros(7);
        e[4] = 1.0;
        let expected = op.left().row(4).transpose() * op.right().row(4);
        assert!((op.adjoint(&e).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn deterministic_under_seed() {
        let d = ProblemDims::new(5, 3, 1, 2, 7).unwrap();
        assert_eq!(make_rank_one(&d, 11).left(), make_rank_one(&d, 11).left());
        assert_eq!(make_rank_one(&d, 11).right(), make_rank_one(&d, 11).right());
    }
}
