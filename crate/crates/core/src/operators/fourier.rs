//! Blind deconvolution lifted to rank-one measurements.
//!
//! With `w = B u`, `z = C v` and the unitary DFT `F`, the spectrum of the
//! circular convolution is `F(w ∗ z) = √m · (F B u) ⊙ (F C v)`, i.e. the
//! measurement `y_p = a_pᵀ (u vᵀ) b_p` with `a_p = (FB)_{p,:}` and
//! `b_p = √m (FC)_{p,:}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    check_factored, check_matrix, check_measurements, normal_matrix, rng, rowwise_dot, scale_rows,
    BackendKind, DenseOperator, MeasurementOperator,
};
use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::tangent::TangentVector;

/// Imaginary residue allowed in a gradient, relative to its real part.
const REALNESS_TOL: f64 = 1e-8;

/// `F_{p,k} = exp(−2πi·p·k/m) / √m`, 0-based.
pub fn dft_entry(m: usize, p: usize, k: usize) -> Complex64 {
    let t = ((p as u128 * k as u128) % m as u128) as f64;
    let (s, c) = (2.0 * PI * t / m as f64).sin_cos();
    Complex64::new(c, -s) / (m as f64).sqrt()
}

/// Complex matrix as separate real and imaginary parts.
#[derive(Debug, Clone)]
struct SplitMatrix {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SplitMatrix {
    fn dft(m: usize) -> Self {
        let mut re = DMatrix::zeros(m, m);
        let mut im = DMatrix::zeros(m, m);
        for p in 0..m {
            for k in 0..m {
                let f = dft_entry(m, p, k);
                re[(p, k)] = f.re;
                im[(p, k)] = f.im;
            }
        }
        SplitMatrix { re, im }
    }

    /// `self · x` for real `x`.
    fn mul_real(&self, x: &DMatrix<f64>) -> SplitMatrix {
        SplitMatrix {
            re: &self.re * x,
            im: &self.im * x,
        }
    }

    fn scale(&self, c: f64) -> SplitMatrix {
        SplitMatrix {
            re: &self.re * c,
            im: &self.im * c,
        }
    }

    /// Row-wise multiplication by the complex weights `w`.
    fn scale_rows(&self, w_re: &[f64], w_im: &[f64]) -> SplitMatrix {
        SplitMatrix {
            re: scale_rows(&self.re, w_re) - scale_rows(&self.im, w_im),
            im: scale_rows(&self.im, w_re) + scale_rows(&self.re, w_im),
        }
    }

    /// `selfᵀ · x` (plain transpose, no conjugation).
    fn tr_mul(&self, x: &SplitMatrix) -> SplitMatrix {
        SplitMatrix {
            re: self.re.tr_mul(&x.re) - self.im.tr_mul(&x.im),
            im: self.re.tr_mul(&x.im) + self.im.tr_mul(&x.re),
        }
    }

    fn entry(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }
}

#[derive(Debug, Clone)]
pub struct FourierBlindDeconvOperator {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    fb: SplitMatrix,
    /// `√m · F C`.
    fc_scaled: SplitMatrix,
    frobenius: f64,
}

pub(super) fn random(rows: usize, cols: usize, m: usize, seed: u64) -> FourierBlindDeconvOperator {
    let mut rng = rng(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let b = normal_matrix(&mut rng, m, rows, scale);
    let c = normal_matrix(&mut rng, m, cols, scale);
    FourierBlindDeconvOperator::new(b, c)
}

/// Subspace matrices `B` (`m × M`) and `C` (`m × N`) with i.i.d. `N(0, 1/m)` entries.
pub fn make_fourier_blind_deconv(dims: &ProblemDims, seed: u64) -> FourierBlindDeconvOperator {
    random(dims.rows, dims.cols, dims.measurements, seed)
}

impl FourierBlindDeconvOperator {
    pub fn new(b: DMatrix<f64>, c: DMatrix<f64>) -> Self {
        assert_eq!(b.nrows(), c.nrows(), "B and C must have m rows");
        let m = b.nrows();
        let f = SplitMatrix::dft(m);
        let fb = f.mul_real(&b);
        let fc_scaled = f.mul_real(&c).scale((m as f64).sqrt());
        let frobenius = (0..m)
            .map(|p| {
                let a: f64 = (0..fb.re.ncols()).map(|i| fb.entry(p, i).norm_sqr()).sum();
                let b: f64 = (0..fc_scaled.re.ncols()).map(|j| fc_scaled.entry(p, j).norm_sqr()).sum();
                a * b
            })
            .sum::<f64>()
            .sqrt();
        FourierBlindDeconvOperator { b, c, fb, fc_scaled, frobenius }
    }

    /// `‖A‖_F`, a bound on the operator norm of the adjoint.
    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius
    }

    fn rounding_floor(&self, residual: &DVector<f64>, scale: f64) -> f64 {
        1e3 * f64::EPSILON * self.frobenius * scale.max(residual.norm())
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `(F B)_{p,i}`.
    pub fn fb_entry(&self, p: usize, i: usize) -> Complex64 {
        self.fb.entry(p, i)
    }

    /// `(F C)_{p,j}`.
    pub fn fc_entry(&self, p: usize, j: usize) -> Complex64 {
        self.fc_scaled.entry(p, j) / (self.b.nrows() as f64).sqrt()
    }

    /// Complex measurement vector.
    pub fn apply_complex(&self, x: &DMatrix<f64>) -> Result<Vec<Complex64>> {
        let y = self.apply(x)?;
        Ok(to_complex(&y))
    }

    /// `Σ_p conj(z_p) A_p` as `(real part, imaginary part)`.
    pub fn adjoint_complex(&self, z: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_measurements(self, z)?;
        let (w_re, w_im) = conj_weights(z);
        let out = self.fb.tr_mul(&self.fc_scaled.scale_rows(&w_re, &w_im));
        Ok((out.re, out.im))
    }

    fn projected_parts(
        &self,
        base: &FactoredMatrix,
        z: &DVector<f64>,
    ) -> Result<(SplitMatrix, SplitMatrix)> {
        check_factored(self, base)?;
        check_measurements(self, z)?;
        let (w_re, w_im) = conj_weights(z);
        let bv = self.fc_scaled.mul_real(base.v()).scale_rows(&w_re, &w_im);
        let au = self.fb.mul_real(base.u()).scale_rows(&w_re, &w_im);
        Ok((self.fb.tr_mul(&bv), self.fc_scaled.tr_mul(&au)))
    }
}

fn conj_weights(z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let m = z.len() / 2;
    let re = z.rows(0, m).iter().copied().collect();
    let im = z.rows(m, m).iter().map(|v| -v).collect();
    (re, im)
}

fn to_complex(y: &DVector<f64>) -> Vec<Complex64> {
    let m = y.len() / 2;
    (0..m).map(|p| Complex64::new(y[p], y[m + p])).collect()
}

fn stack(re: DVector<f64>, im: DVector<f64>) -> DVector<f64> {
    let m = re.len();
    let mut out = DVector::zeros(2 * m);
    out.rows_mut(0, m).copy_from(&re);
    out.rows_mut(m, m).copy_from(&im);
    out
}

/// `‖im‖ ≤ 1e-8 ‖re‖`, plus a floor for the conjugate-asymmetric rounding
/// noise (about `ε ‖y‖`) that forming `A(X) − y` leaves in the residual.
fn check_real(re: &DMatrix<f64>, im: &DMatrix<f64>, floor: f64, what: &str) -> Result<()> {
    let (rn, iname) = (re.norm(), im.norm());
    let allowed = REALNESS_TOL * rn + floor;
    if iname > allowed {
        return Err(Error::Numerical(format!(
            "{what} has imaginary residue {iname:.3e} against real part {rn:.3e}; \
             the residual is not the image of a real matrix"
        )));
    }
    Ok(())
}

impl MeasurementOperator for FourierBlindDeconvOperator {
    fn kind(&self) -> BackendKind {
        BackendKind::Fourier
    }

    fn shape(&self) -> (usize, usize) {
        (self.b.ncols(), self.c.ncols())
    }

    fn num_measurements(&self) -> usize {
        self.b.nrows()
    }

    fn output_len(&self) -> usize {
        2 * self.b.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_matrix(self, x)?;
        let ax = self.fb.mul_real(x);
        let (b, t) = (&self.fc_scaled, &ax);
        let re = rowwise_dot(&t.re, &b.re, None) - rowwise_dot(&t.im, &b.im, None);
        let im = rowwise_dot(&t.re, &b.im, None) + rowwise_dot(&t.im, &b.re, None);
        Ok(stack(re, im))
    }

    fn apply_factored(&self, x: &FactoredMatrix) -> Result<DVector<f64>> {
        check_factored(self, x)?;
        if x.rank() == 0 {
            return Ok(DVector::zeros(self.output_len()));
        }
        let rows = x.support().indices();
        let u_s = x.u().select_rows(rows);
        let au = SplitMatrix {
            re: self.fb.re.select_columns(rows) * &u_s,
            im: self.fb.im.select_columns(rows) * &u_s,
        };
        let bv = self.fc_scaled.mul_real(x.v());
        let w = Some(x.sigma());
        let re = rowwise_dot(&au.re, &bv.re, w) - rowwise_dot(&au.im, &bv.im, w);
        let im = rowwise_dot(&au.re, &bv.im, w) + rowwise_dot(&au.im, &bv.re, w);
        Ok(stack(re, im))
    }

    fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.adjoint_complex(z)?.0)
    }

    fn projected_adjoint(&self, base: &FactoredMatrix, z: &DVector<f64>) -> Result<TangentVector> {
        let (z_v, zt_u) = self.projected_parts(base, z)?;
        TangentVector::from_products(base, z_v.re, zt_u.re)
    }

    fn gradient(&self, residual: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>> {
        let (re, im) = self.adjoint_complex(residual)?;
        check_real(&re, &im, self.rounding_floor(residual, scale), "gradient")?;
        Ok(re)
    }

    fn projected_gradient(
        &self,
        base: &FactoredMatrix,
        residual: &DVector<f64>,
        scale: f64,
    ) -> Result<TangentVector> {
        let (z_v, zt_u) = self.projected_parts(base, residual)?;
        let floor = self.rounding_floor(residual, scale);
        check_real(&z_v.re, &z_v.im, floor, "projected gradient (Z V)")?;
        check_real(&zt_u.re, &zt_u.im, floor, "projected gradient (Zᵀ U)")?;
        TangentVector::from_products(base, z_v.re, zt_u.re)
    }

    /// `2m` real matrices: `Re A_p` for the first `m` rows, `Im A_p` for the rest.
    fn to_dense(&self) -> DenseOperator {
        let m = self.num_measurements();
        let (rows, cols) = self.shape();
        let mut mats = vec![DMatrix::zeros(rows, cols); 2 * m];
        for p in 0..m {
            for i in 0..rows {
                let a = self.fb.entry(p, i);
                for j in 0..cols {
                    let entry = a * self.fc_scaled.entry(p, j);
                    mats[p][(i, j)] = entry.re;
                    mats[m + p][(i, j)] = entry.im;
                }
            }
        }
        DenseOperator::from_matrices(BackendKind::Dense, &mats).expect("finite DFT products")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_is_unitary() {
        let m = 7;
        for j in 0..m {
            for k in 0..m {
                let dot: Complex64 = (0..m).map(|p| dft_entry(m, p, j).conj() * dft_entry(m, p, k)).sum();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((dot - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn precomputed_products_match_definition() {
        let d = ProblemDims::new(6, 4, 1, 2, 9).unwrap();
        let op = make_fourier_blind_deconv(&d, 2);
        for p in 0..9 {
            for i in 0..6 {
                let direct: Complex64 = (0..9).map(|k| dft_entry(9, p, k) * op.b()[(k, i)]).sum();
                assert!((direct - op.fb_entry(p, i)).norm() < 1e-12);
            }
            for j in 0..4 {
                let direct: Complex64 = (0..9).map(|k| dft_entry(9, p, k) * op.c()[(k, j)]).sum();
                assert!((direct - op.fc_entry(p, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_rejects_residual_outside_real_range() {
        let d = ProblemDims::new(6, 4, 1, 2, 9).unwrap();
        let op = make_fourier_blind_deconv(&d, 2);
        let mut z = DVector::zeros(18);
        z[1] = 1.0;
        assert!(matches!(op.gradient(&z, 1.0), Err(Error::Numerical(_))));
        let x = DMatrix::from_fn(6, 4, |i, j| (i as f64 - j as f64) * 0.3);
        let y = op.apply(&x).unwrap();
        let g = op.gradient(&y, y.norm()).unwrap();
        assert!((g - op.adjoint(&y).unwrap()).norm() == 0.0);
    }

    #[test]
    fn gradient_accepts_rounding_level_residuals() {
        let d = ProblemDims::new(6, 4, 1, 2, 9).unwrap();
        let op = make_fourier_blind_deconv(&d, 2);
        let x = DMatrix::from_fn(6, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let y = op.apply(&x).unwrap();
        let r = op.apply(&(&x * (1.0 + 1e-13))).unwrap() - &y;
        assert!(op.gradient(&r, y.norm()).is_ok());
    }
}
