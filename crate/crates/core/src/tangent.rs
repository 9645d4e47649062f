//! Tangent space of the fixed-rank manifold at a factored point, and the
//! compact `Û K V̂ᵀ` form of `X − α ξ` used by the Riemannian solvers.

use nalgebra::{DMatrix, DVector};

use crate::dims::SupportSet;
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::projection::{largest_rows, refactor_rows, row_norms};
use crate::svd::thin_svd;

/// Element `U K Vᵀ + U_p Vᵀ + U V_pᵀ` of the tangent space at `base = U Σ Vᵀ`,
/// with `Uᵀ U_p = 0` and `Vᵀ V_p = 0`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: FactoredMatrix,
    core: DMatrix<f64>,
    row_update: DMatrix<f64>,
    col_update: DMatrix<f64>,
}

impl TangentVector {
    /// Assembles `P_T(Z)` from the products `Z V` (`M × r`) and `Zᵀ U` (`N × r`).
    ///
    /// This is all the projector needs, which lets operators with structured
    /// adjoints avoid forming `Z`.
    pub fn from_products(
        base: &FactoredMatrix,
        z_v: DMatrix<f64>,
        zt_u: DMatrix<f64>,
    ) -> Result<Self> {
        let r = base.rank();
        if z_v.shape() != (base.rows(), r) || zt_u.shape() != (base.cols(), r) {
            return Err(Error::Dimension(format!(
                "tangent products have shapes {:?} and {:?}, expected ({}, {r}) and ({}, {r})",
                z_v.shape(),
                zt_u.shape(),
                base.rows(),
                base.cols()
            )));
        }
        let core = base.u().transpose() * &z_v;
        let row_update = z_v - base.u() * &core;
        let col_update = zt_u - base.v() * core.transpose();
        Ok(TangentVector {
            base: base.clone(),
            core,
            row_update,
            col_update,
        })
    }

    pub fn zero(base: &FactoredMatrix) -> Self {
        let r = base.rank();
        TangentVector {
            base: base.clone(),
            core: DMatrix::zeros(r, r),
            row_update: DMatrix::zeros(base.rows(), r),
            col_update: DMatrix::zeros(base.cols(), r),
        }
    }

    pub fn base(&self) -> &FactoredMatrix {
        &self.base
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn row_update(&self) -> &DMatrix<f64> {
        &self.row_update
    }

    pub fn col_update(&self) -> &DMatrix<f64> {
        &self.col_update
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let u = self.base.u();
        let v = self.base.v();
        (u * &self.core + &self.row_update) * v.transpose() + u * self.col_update.transpose()
    }

    /// Frobenius norm; the three components are mutually orthogonal.
    pub fn norm(&self) -> f64 {
        (self.core.norm_squared() + self.row_update.norm_squared() + self.col_update.norm_squared())
            .sqrt()
    }

    /// Frobenius inner product with another tangent vector at the same base.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.core.dot(&other.core) + self.row_update.dot(&other.row_update) + self.col_update.dot(&other.col_update)
    }

    pub fn scale(&self, c: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            core: &self.core * c,
            row_update: &self.row_update * c,
            col_update: &self.col_update * c,
        }
    }

    /// Orthonormal bases for `[U, U_p]` and `[V, V_p]`, from which any
    /// combination `a·base + b·self` has a compact form.
    pub fn retraction_basis(&self) -> RetractionBasis {
        let (q_u, r_u) = orthonormalize_against(self.base.u(), &self.row_update);
        let (q_v, r_v) = orthonormalize_against(self.base.v(), &self.col_update);
        RetractionBasis {
            u_hat: hcat(self.base.u(), &q_u),
            v_hat: hcat(self.base.v(), &q_v),
            sigma: self.base.sigma().clone(),
            core: self.core.clone(),
            r_u,
            r_v,
        }
    }

    /// Compact form of the tangent vector itself (rank at most `2r`).
    pub fn to_compact(&self) -> CompactMatrix {
        self.retraction_basis().combine(0.0, 1.0)
    }
}

/// `P_T(Z) = U Uᵀ Z + Z V Vᵀ − U Uᵀ Z V Vᵀ` at `base`.
///
/// A base of rank `r < k` uses its rank-`r` factors.
pub fn tangent_project(base: &FactoredMatrix, z: &DMatrix<f64>) -> Result<TangentVector> {
    if z.shape() != (base.rows(), base.cols()) {
        return Err(Error::Dimension(format!(
            "cannot project {:?} matrix onto tangent space of {}x{} point",
            z.shape(),
            base.rows(),
            base.cols()
        )));
    }
    TangentVector::from_products(base, z * base.v(), z.transpose() * base.u())
}

/// `X − α ξ = Û K V̂ᵀ` with `Û`, `V̂` orthonormal and at most `2r` columns each.
pub fn tangent_retract_combine(
    base: &FactoredMatrix,
    direction: &TangentVector,
    alpha: f64,
) -> Result<CompactMatrix> {
    if direction.base() != base {
        return Err(Error::Parameter(
            "tangent direction is attached to a different base point".into(),
        ));
    }
    Ok(direction.retraction_basis().combine(1.0, -alpha))
}

/// Precomputed orthonormal bases of a tangent vector; cheap to recombine for
/// every trial step of a line search.
#[derive(Debug, Clone)]
pub struct RetractionBasis {
    u_hat: DMatrix<f64>,
    v_hat: DMatrix<f64>,
    sigma: DVector<f64>,
    core: DMatrix<f64>,
    r_u: DMatrix<f64>,
    r_v: DMatrix<f64>,
}

impl RetractionBasis {
    /// Compact form of `a · base + b · ξ`.
    pub fn combine(&self, a: f64, b: f64) -> CompactMatrix {
        let r = self.sigma.len();
        let (qu, qv) = (self.r_u.nrows(), self.r_v.nrows());
        let mut k = DMatrix::zeros(r + qu, r + qv);
        let mut top = &self.core * b;
        for i in 0..r {
            top[(i, i)] += a * self.sigma[i];
        }
        k.view_mut((0, 0), (r, r)).copy_from(&top);
        k.view_mut((0, r), (r, qv)).copy_from(&(self.r_v.transpose() * b));
        k.view_mut((r, 0), (qu, r)).copy_from(&(&self.r_u * b));
        CompactMatrix {
            u: self.u_hat.clone(),
            core: k,
            v: self.v_hat.clone(),
        }
    }

    pub fn retract(&self, alpha: f64) -> CompactMatrix {
        self.combine(1.0, -alpha)
    }
}

/// `U · K · Vᵀ` with orthonormal `U` (`M × p`) and `V` (`N × q`).
#[derive(Debug, Clone)]
pub struct CompactMatrix {
    u: DMatrix<f64>,
    core: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl CompactMatrix {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn densify(&self) -> DMatrix<f64> {
        &self.u * &self.core * self.v.transpose()
    }

    /// `Û K`, whose row norms equal those of the full matrix.
    pub fn left(&self) -> DMatrix<f64> {
        &self.u * &self.core
    }

    pub fn row_norms(&self) -> Vec<f64> {
        row_norms(&self.left())
    }

    /// `T_k ∘ H_s`: pick the `s` largest rows of `Û K`, then an SVD of the
    /// resulting `s × q` block.
    pub fn quasi_proj_ks(&self, k: usize, s: usize) -> Result<FactoredMatrix> {
        check(k, s, self.u.nrows())?;
        let left = self.left();
        let support = largest_rows(&row_norms(&left), s);
        refactor_rows(&left, &self.v, support, k)
    }

    /// `H_s ∘ T_k`: truncate the small core, then threshold rows.
    pub fn quasi_proj_hat_ks(&self, k: usize, s: usize) -> Result<FactoredMatrix> {
        check(k, s, self.u.nrows())?;
        let tk = thin_svd(&self.core)?.truncate(k);
        let mut left = &self.u * &tk.u;
        for (j, sv) in tk.sigma.iter().enumerate() {
            left.column_mut(j).scale_mut(*sv);
        }
        let support = largest_rows(&row_norms(&left), s);
        refactor_rows(&left, &(&self.v * &tk.v), support, k)
    }

    /// `T_k` of the compact matrix.
    pub fn truncate_rank(&self, k: usize) -> Result<FactoredMatrix> {
        if k < 1 {
            return Err(Error::Parameter("rank k must be at least 1".into()));
        }
        let tk = thin_svd(&self.core)?.truncate(k);
        let u = &self.u * &tk.u;
        let v = &self.v * &tk.v;
        let support: SupportSet = (0..u.nrows())
            .filter(|&i| u.row(i).iter().any(|x| *x != 0.0))
            .collect();
        let mut u = u;
        for i in 0..u.nrows() {
            if !support.contains(i) {
                u.row_mut(i).fill(0.0);
            }
        }
        Ok(FactoredMatrix::from_parts_unchecked(u, tk.sigma, v, support))
    }
}

fn check(k: usize, s: usize, rows: usize) -> Result<()> {
    if k < 1 || s < 1 || s > rows {
        return Err(Error::Parameter(format!(
            "need 1 <= k and 1 <= s <= {rows}, got k = {k}, s = {s}"
        )));
    }
    Ok(())
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Writes `w = Q R` with `Q` orthonormal and orthogonal to the columns of
/// `basis`. Columns of `w` already in the span of earlier ones are dropped, so
/// `Q` may have fewer columns than `w`.
///
/// The component of `w` along `basis` is discarded; callers pass `w ⊥ basis`.
fn orthonormalize_against(basis: &DMatrix<f64>, w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = w.nrows();
    let drop_tol = 1e-13 * w.norm();
    let mut q_cols: Vec<DVector<f64>> = Vec::with_capacity(w.ncols());
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(w.ncols());
    for j in 0..w.ncols() {
        let mut v = w.column(j).into_owned();
        let mut c = vec![0.0; q_cols.len()];
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = basis.transpose() * &v;
                v -= basis * proj;
            }
            for (i, q) in q_cols.iter().enumerate() {
                let d = q.dot(&v);
                c[i] += d;
                v.axpy(-d, q, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > drop_tol && nrm > 0.0 {
            q_cols.push(v / nrm);
            c.push(nrm);
        }
        coeffs.push(c);
    }
    let q = q_cols.len();
    let mut qm = DMatrix::zeros(n, q);
    for (i, col) in q_cols.iter().enumerate() {
        qm.column_mut(i).copy_from(col);
    }
    let mut r = DMatrix::zeros(q, w.ncols());
    for (j, c) in coeffs.iter().enumerate() {
        for (i, val) in c.iter().enumerate() {
            r[(i, j)] = *val;
        }
    }
    (qm, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{quasi_proj_hat_ks, quasi_proj_ks, truncate_rank};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn dense_projector(base: &FactoredMatrix, z: &DMatrix<f64>) -> DMatrix<f64> {
        let pu = base.u() * base.u().transpose();
        let pv = base.v() * base.v().transpose();
        &pu * z + z * &pv - &pu * z * &pv
    }

    fn base_point(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> FactoredMatrix {
        truncate_rank(&(random(rng, m, k) * random(rng, k, n)), k).unwrap()
    }

    #[test]
    fn projector_matches_formula_and_fixes_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = base_point(&mut rng, 7, 5, 2);
        let z = random(&mut rng, 7, 5);
        let t = tangent_project(&base, &z).unwrap();
        assert!((t.densify() - dense_projector(&base, &z)).norm() < 1e-12);
        assert!((t.norm() - t.densify().norm()).abs() < 1e-12);
        let x = base.densify();
        let tx = tangent_project(&base, &x).unwrap();
        assert!((tx.densify() - x).norm() < 1e-12);
        assert!((base.u().transpose() * t.row_update()).norm() < 1e-12);
        assert!((base.v().transpose() * t.col_update()).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_complement_projects_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = base_point(&mut rng, 6, 4, 2);
        let w = random(&mut rng, 6, 4);
        let cu = DMatrix::identity(6, 6) - base.u() * base.u().transpose();
        let cv = DMatrix::identity(4, 4) - base.v() * base.v().transpose();
        let t = tangent_project(&base, &(cu * w * cv)).unwrap();
        assert!(t.norm() < 1e-12);
    }

    #[test]
    fn retraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = base_point(&mut rng, 8, 6, 2);
        let xi = tangent_project(&base, &random(&mut rng, 8, 6)).unwrap();
        let c0 = tangent_retract_combine(&base, &xi, 0.0).unwrap();
        assert!((c0.densify() - base.densify()).norm() < 1e-12);
        let own = tangent_project(&base, &base.densify()).unwrap();
        let c1 = tangent_retract_combine(&base, &own, 1.0).unwrap();
        assert!(c1.densify().norm() < 1e-12);
        let c = tangent_retract_combine(&base, &xi, 0.37).unwrap();
        let expected = base.densify() - xi.densify() * 0.37;
        assert!((c.densify() - expected).norm() < 1e-12);
        assert!(c.u().ncols() <= 4 && c.v().ncols() <= 4);
        let eye = DMatrix::<f64>::identity(c.u().ncols(), c.u().ncols());
        assert!((c.u().transpose() * c.u() - eye).norm() < 1e-12);
        let other = base_point(&mut rng, 8, 6, 2);
        assert!(tangent_retract_combine(&other, &xi, 1.0).is_err());
    }

    #[test]
    fn zero_direction_keeps_bases_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = base_point(&mut rng, 5, 3, 2);
        let c = tangent_retract_combine(&base, &TangentVector::zero(&base), 0.5).unwrap();
        assert_eq!(c.u().ncols(), 2);
        assert!((c.densify() - base.densify()).norm() < 1e-12);
    }

    #[test]
    fn compact_projections_match_dense_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let base = base_point(&mut rng, 9, 5, 2);
            let xi = tangent_project(&base, &random(&mut rng, 9, 5)).unwrap();
            let compact = tangent_retract_combine(&base, &xi, 0.8).unwrap();
            let dense = compact.densify();
            let a = compact.quasi_proj_ks(2, 4).unwrap();
            let b = quasi_proj_ks(&dense, 2, 4).unwrap();
            assert!((a.densify() - b.densify()).norm() < 1e-10);
            assert_eq!(a.support(), b.support());
            let a = xi.to_compact().quasi_proj_hat_ks(2, 4).unwrap();
            let b = quasi_proj_hat_ks(&xi.densify(), 2, 4).unwrap();
            assert!((a.densify() - b.densify()).norm() < 1e-10);
            let t = compact.truncate_rank(2).unwrap();
            let td = truncate_rank(&dense, 2).unwrap();
            assert!((t.densify() - td.densify()).norm() < 1e-10);
        }
    }
}
