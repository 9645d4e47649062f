//! Recovery of matrices that are simultaneously low-rank and row-sparse from
//! linear measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`dims`], [`factored`], [`projection`], [`tangent`]: domain types, the
//!   row thresholding / rank truncation projections onto `M_{k,s}`, row-wise
//!   soft thresholding and the tangent-space calculus of the fixed-rank
//!   manifold.
//! * [`operators`]: measurement operators (dense Gaussian, random rank-one,
//!   Fourier blind deconvolution) with factored fast paths.
//! * [`solvers`]: IHT, Riemannian IHT and the Riemannian proximal gradient
//!   method, with Armijo backtracking.
//! * [`oracle`]: brute-force references used by tests and `verify`.
//! * [`harness`]: phase-transition and convergence-trace experiments.
//! * [`cli`]: the `sparselow` command-line front end.
//!
//! Row indices are 0-based throughout.

pub mod cli;
pub mod dims;
pub mod error;
pub mod factored;
pub mod harness;
pub mod operators;
pub mod oracle;
pub mod par;
pub mod projection;
pub mod solvers;
pub mod svd;
pub mod tangent;

pub use dims::{ProblemDims, SupportSet};
pub use error::{Error, Result};
pub use factored::FactoredMatrix;
pub use operators::{BackendKind, MeasurementOperator};
pub use tangent::{CompactMatrix, TangentVector};

/// Dense ambient matrices are plain column-major `nalgebra` matrices.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
/// Real measurement vectors. Complex measurements are stored as `[re; im]`.
pub type Measurements = nalgebra::DVector<f64>;

/// Tolerance for structural identities (projector algebra, fast/slow path agreement).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Tolerance for orthonormality of factor matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
