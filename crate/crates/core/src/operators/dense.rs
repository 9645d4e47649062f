use nalgebra::{DMatrix, DVector};

use super::{check_factored, check_matrix, check_measurements, normal_matrix, rng, BackendKind, MeasurementOperator};
use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;

/// Explicit measurement matrices `A_p`, stored as the rows of one
/// `m × (M·N)` matrix in column-major vectorization.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    kind: BackendKind,
    rows: usize,
    cols: usize,
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn from_matrices(kind: BackendKind, mats: &[DMatrix<f64>]) -> Result<Self> {
        let (rows, cols) = mats
            .first()
            .map(|a| a.shape())
            .ok_or_else(|| Error::Parameter("at least one measurement matrix required".into()))?;
        let mut matrix = DMatrix::zeros(mats.len(), rows * cols);
        for (p, a) in mats.iter().enumerate() {
            if a.shape() != (rows, cols) {
                return Err(Error::Dimension(format!(
                    "measurement matrix {p} has shape {:?}, expected {:?}",
                    a.shape(),
                    (rows, cols)
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("measurement matrix {p} has non-finite entries")));
            }
            for (idx, val) in a.iter().enumerate() {
                matrix[(p, idx)] = *val;
            }
        }
        Ok(DenseOperator { kind, rows, cols, matrix })
    }

    /// The measurement matrix `A_p`.
    pub fn measurement_matrix(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_iterator(self.rows, self.cols, self.matrix.row(p).iter().copied())
    }

    /// The `m × (M·N)` matrix whose rows are `vec(A_p)` (column-major).
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

pub(super) fn gaussian(rows: usize, cols: usize, m: usize, seed: u64) -> DenseOperator {
    let mut rng = rng(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let mut matrix = DMatrix::zeros(m, rows * cols);
    for p in 0..m {
        // entries of A_p drawn in row-major order
        let a = normal_matrix(&mut rng, rows, cols, scale);
        for (idx, val) in a.iter().enumerate() {
            matrix[(p, idx)] = *val;
        }
    }
    DenseOperator {
        kind: BackendKind::Gaussian,
        rows,
        cols,
        matrix,
    }
}

/// I.i.d. Gaussian measurements with standard deviation `1/√m`.
pub fn make_gaussian(dims: &ProblemDims, seed: u64) -> DenseOperator {
    gaussian(dims.rows, dims.cols, dims.measurements, seed)
}

impl MeasurementOperator for DenseOperator {
    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn num_measurements(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_matrix(self, x)?;
        Ok(&self.matrix * DVector::from_column_slice(x.as_slice()))
    }

    /// Only the support rows of the iterate contribute: `O(m·s·N)`.
    fn apply_factored(&self, x: &FactoredMatrix) -> Result<DVector<f64>> {
        check_factored(self, x)?;
        let mut y = DVector::zeros(self.matrix.nrows());
        if x.rank() == 0 {
            return Ok(y);
        }
        let rows_s = x.support().indices();
        let block = x.scaled_left().select_rows(rows_s) * x.v().transpose();
        for j in 0..self.cols {
            for (local, &i) in rows_s.iter().enumerate() {
                let val = block[(local, j)];
                if val != 0.0 {
                    y.axpy(val, &self.matrix.column(i + j * self.rows), 1.0);
                }
            }
        }
        Ok(y)
    }

    fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_measurements(self, z)?;
        let flat = self.matrix.tr_mul(z);
        Ok(DMatrix::from_column_slice(self.rows, self.cols, flat.as_slice()))
    }

    fn to_dense(&self) -> DenseOperator {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ProblemDims {
        ProblemDims::new(6, 4, 1, 2, 15).unwrap()
    }

    #[test]
    fn seeded_construction_is_reproducible() {
        let a = make_gaussian(&dims(), 9);
        let b = make_gaussian(&dims(), 9);
        assert_eq!(a.as_matrix(), b.as_matrix());
        assert_ne!(a.as_matrix(), make_gaussian(&dims(), 10).as_matrix());
    }

    #[test]
    fn adjoint_of_unit_vector_is_measurement_matrix() {
        let op = make_gaussian(&dims(), 1);
        for p in [0, 7, 14] {
            let mut e = DVector::zeros(15);
            e[p] = 1.0;
            assert_eq!(op.adjoint(&e).unwrap(), op.measurement_matrix(p));
        }
    }

    #[test]
    fn zero_input_and_shape_errors() {
        let op = make_gaussian(&dims(), 1);
        assert_eq!(op.apply(&DMatrix::zeros(6, 4)).unwrap(), DVector::zeros(15));
        assert!(matches!(op.apply(&DMatrix::zeros(4, 6)), Err(Error::Dimension(_))));
        assert!(matches!(op.adjoint(&DVector::zeros(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn entry_variance_is_one_over_m() {
        // m·M·N = 1.2e6 samples
        let d = ProblemDims::new(100, 40, 1, 2, 300).unwrap();
        let op = make_gaussian(&d, 5);
        let n = op.as_matrix().len() as f64;
        let mean = op.as_matrix().iter().sum::<f64>() / n;
        let var = op.as_matrix().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var * 300.0 - 1.0).abs() < 0.05, "variance·m = {}", var * 300.0);
    }
}
