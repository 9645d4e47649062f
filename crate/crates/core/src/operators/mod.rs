//! Linear measurement operators `A: R^{M×N} → R^m`.
//!
//! Every backend provides the plain map, its adjoint and the tangent-space
//! projected adjoint. Rank-one backends override the factored entry points
//! with contractions that never form an `M × N` matrix.
//!
//! The Fourier backend measures in `C^m`; its measurement vectors are stored
//! as `[re; im]` in `R^{2m}` with the induced real inner product, so its
//! adjoint is `Re(Σ_p conj(z_p) A_p)`.

mod dense;
mod fourier;
mod rank_one;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use dense::{make_gaussian, DenseOperator};
pub use fourier::{dft_entry, make_fourier_blind_deconv, FourierBlindDeconvOperator};
pub use rank_one::{make_rank_one, RankOneOperator};

use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::tangent::{tangent_project, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Gaussian,
    #[serde(rename = "rankone")]
    RankOne,
    Fourier,
    /// Explicit measurement matrices, e.g. the dense copy of another backend.
    Dense,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Gaussian => "gaussian",
            BackendKind::RankOne => "rankone",
            BackendKind::Fourier => "fourier",
            BackendKind::Dense => "dense",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(BackendKind::Gaussian),
            "rankone" | "rank-one" => Ok(BackendKind::RankOne),
            "fourier" => Ok(BackendKind::Fourier),
            other => Err(Error::Parameter(format!(
                "unknown backend '{other}' (expected gaussian, rankone or fourier)"
            ))),
        }
    }
}

pub trait MeasurementOperator: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// `(M, N)`.
    fn shape(&self) -> (usize, usize);

    /// Number of measurements `m`.
    fn num_measurements(&self) -> usize;

    /// Length of the real measurement vector (`2m` for complex backends).
    fn output_len(&self) -> usize {
        self.num_measurements()
    }

    fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;

    fn apply_factored(&self, x: &FactoredMatrix) -> Result<DVector<f64>> {
        self.apply(&x.densify())
    }

    fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// `P_T(A*(z))` at `base`.
    fn projected_adjoint(&self, base: &FactoredMatrix, z: &DVector<f64>) -> Result<TangentVector> {
        tangent_project(base, &self.adjoint(z)?)
    }

    /// `A*(z)` for a residual `z = A(X) − y` with `‖y‖ = scale`. Backends that
    /// compute in complex arithmetic verify here that the result is real, up
    /// to the rounding error a residual of that scale can carry.
    fn gradient(&self, residual: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>> {
        let _ = scale;
        self.adjoint(residual)
    }

    /// `P_T(A*(z))` for a residual `z = A(X) − y`, with the same realness check.
    fn projected_gradient(
        &self,
        base: &FactoredMatrix,
        residual: &DVector<f64>,
        scale: f64,
    ) -> Result<TangentVector> {
        let _ = scale;
        self.projected_adjoint(base, residual)
    }

    /// Equivalent operator with explicit measurement matrices.
    fn to_dense(&self) -> DenseOperator;
}

/// Everything needed to rebuild an operator bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub backend: BackendKind,
    pub rows: usize,
    pub cols: usize,
    pub measurements: usize,
    pub seed: u64,
}

impl OperatorSpec {
    pub fn new(backend: BackendKind, dims: &ProblemDims, seed: u64) -> Self {
        OperatorSpec {
            backend,
            rows: dims.rows,
            cols: dims.cols,
            measurements: dims.measurements,
            seed,
        }
    }

    pub fn build(&self) -> Result<Box<dyn MeasurementOperator>> {
        let (rows, cols, m) = (self.rows, self.cols, self.measurements);
        if rows == 0 || cols == 0 || m == 0 {
            return Err(Error::Parameter(format!(
                "operator dimensions must be positive, got M = {rows}, N = {cols}, m = {m}"
            )));
        }
        Ok(match self.backend {
            BackendKind::Gaussian => Box::new(dense::gaussian(rows, cols, m, self.seed)),
            BackendKind::RankOne => Box::new(rank_one::random(rows, cols, m, self.seed)),
            BackendKind::Fourier => Box::new(fourier::random(rows, cols, m, self.seed)),
            BackendKind::Dense => {
                return Err(Error::Parameter(
                    "dense operators are built from explicit matrices, not from a seed".into(),
                ))
            }
        })
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    // filled row by row so the stream order matches the semantic layout
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let g: f64 = StandardNormal.sample(rng);
            out[(i, j)] = g * scale;
        }
    }
    out
}

pub(crate) fn check_matrix(op: &dyn MeasurementOperator, x: &DMatrix<f64>) -> Result<()> {
    if x.shape() != op.shape() {
        return Err(Error::Dimension(format!(
            "operator acts on {:?} matrices, got {:?}",
            op.shape(),
            x.shape()
        )));
    }
    Ok(())
}

pub(crate) fn check_factored(op: &dyn MeasurementOperator, x: &FactoredMatrix) -> Result<()> {
    if (x.rows(), x.cols()) != op.shape() {
        return Err(Error::Dimension(format!(
            "operator acts on {:?} matrices, got factored {}x{}",
            op.shape(),
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

pub(crate) fn check_measurements(op: &dyn MeasurementOperator, z: &DVector<f64>) -> Result<()> {
    if z.len() != op.output_len() {
        return Err(Error::Dimension(format!(
            "expected measurement vector of length {}, got {}",
            op.output_len(),
            z.len()
        )));
    }
    Ok(())
}

/// Scales row `p` of `mat` by `w[p]`.
pub(crate) fn scale_rows(mat: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = mat.clone();
    for (p, wp) in w.iter().enumerate() {
        out.row_mut(p).scale_mut(*wp);
    }
    out
}

/// `Σ_j c_j · a[p, j] · b[p, j]` for every row `p`.
pub(crate) fn rowwise_dot(a: &DMatrix<f64>, b: &DMatrix<f64>, col_weights: Option<&DVector<f64>>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for j in 0..a.ncols() {
        let c = col_weights.map_or(1.0, |w| w[j]);
        for p in 0..a.nrows() {
            out[p] += c * a[(p, j)] * b[(p, j)];
        }
    }
    out
}
