//! Randomized checks of the library against the oracles, shared by the
//! hidden `verify` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{dense_reference_step, exact_projection, exact_prox_rowwise, top_right_vectors, OracleBudget};
use crate::dims::ProblemDims;
use crate::error::Result;
use crate::operators::{make_fourier_blind_deconv, make_rank_one, MeasurementOperator};
use crate::projection::{quasi_proj_hat_ks, quasi_proj_ks, soft_threshold_rows, truncate_rank};
use crate::solvers::{fixed_step, Algorithm, SolverConfig};
use crate::tangent::tangent_project;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed violation measure (≤ 0 or ≤ tolerance when passing).
    pub worst: f64,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        PropertyResult {
            name,
            cases: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Records one case whose violation `v` must not exceed `tol`.
    fn case(&mut self, v: f64, tol: f64) {
        self.cases += 1;
        self.worst = self.worst.max(v);
        if !(v <= tol) {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `(M, N, k, s)` with `M ≤ 12`, `N ≤ 6`, `s ≤ 4`, `k < s`, `k ≤ N`.
pub fn small_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize, usize) {
    let m = rng.random_range(3..=12);
    let n = rng.random_range(2..=6);
    let s = rng.random_range(2..=4.min(m));
    let k = rng.random_range(1..s).min(n);
    (m, n, k, s)
}

/// Random element of `M_{k,s}` of exact rank `k` on a random support.
pub fn random_feasible(rng: &mut ChaCha8Rng, d: &ProblemDims) -> DMatrix<f64> {
    let left = uniform(rng, d.sparsity, d.rank);
    let right = uniform(rng, d.rank, d.cols);
    let block = left * right;
    let mut rows: Vec<usize> = (0..d.rows).collect();
    for i in 0..d.sparsity {
        let j = rng.random_range(i..d.rows);
        rows.swap(i, j);
    }
    let mut x = DMatrix::zeros(d.rows, d.cols);
    for (r, &i) in rows.iter().take(d.sparsity).enumerate() {
        x.set_row(i, &block.row(r));
    }
    x
}

fn projections(instances: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quasi = PropertyResult::new("quasi-optimality of both composite projections");
    let mut optimal = PropertyResult::new("exact projection is no farther than the composites");
    let mut chain = PropertyResult::new("row selection and rank truncation each within the optimal distance");
    let mut pythagoras = PropertyResult::new("tangent projection is orthogonal");
    for _ in 0..instances {
        let (m, n, k, s) = small_shape(&mut rng);
        let x = uniform(&mut rng, m, n);
        let exact = exact_projection(&x, k, s, OracleBudget::default())?;
        let dist = exact.distance(&x);
        let d1 = (&x - quasi_proj_ks(&x, k, s)?.densify()).norm();
        let d2 = (&x - quasi_proj_hat_ks(&x, k, s)?.densify()).norm();
        quasi.case(d1.max(d2) - std::f64::consts::SQRT_2 * dist, 1e-9);
        optimal.case(dist - d1.min(d2), 1e-12);

        // D picks the s largest rows, V spans the top right singular vectors of DX
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| x.row(b).norm().total_cmp(&x.row(a).norm()).then(a.cmp(&b)));
        let mut dx = DMatrix::zeros(m, n);
        for &i in order.iter().take(s) {
            dx.set_row(i, &x.row(i));
        }
        let (v, _) = top_right_vectors(&dx, k);
        let dxvv = &dx * &v * v.transpose();
        chain.case((&x - &dx).norm().max((&dx - &dxvv).norm()) - dist, 1e-9);
        chain.case((&x - &dxvv).norm() - std::f64::consts::SQRT_2 * dist, 1e-9);

        let base = truncate_rank(&random_feasible(&mut rng, &ProblemDims::new(m, n, k, s, 1)?), k)?;
        let z = uniform(&mut rng, m, n);
        let pz = tangent_project(&base, &z)?.densify();
        let lhs = pz.norm_squared() + (&z - &pz).norm_squared();
        pythagoras.case((lhs - z.norm_squared()).abs(), 1e-10 * z.norm_squared());
    }
    Ok(vec![quasi, optimal, chain, pythagoras])
}

fn prox(instances: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matches = PropertyResult::new("soft thresholding matches the searched prox");
    let mut first_order = PropertyResult::new("soft thresholding satisfies the optimality condition");
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let y = uniform(&mut rng, 1, n) * rng.random_range(0.1..5.0);
        let mu = rng.random_range(0.0..2.0);
        let x = soft_threshold_rows(&y, mu)?;
        let reference = exact_prox_rowwise(y.as_slice(), mu)?;
        let err = x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        matches.case(err, 1e-5);
        let nx = x.norm();
        if nx > 0.0 {
            // 0 = μ x/‖x‖ + (x − y)
            let resid = (&x * (mu / nx) + (&x - &y)).norm();
            first_order.case(resid, 1e-10);
        }
    }
    Ok(vec![matches, first_order])
}

fn fast_paths(instances: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rank_one = PropertyResult::new("rank-one fast paths match the dense operator");
    let mut fourier = PropertyResult::new("Fourier fast paths match the dense operator");
    for t in 0..instances {
        let rows = rng.random_range(4..=60);
        let cols = rng.random_range(2..=60);
        let s = rng.random_range(2..=rows.min(8));
        let k = rng.random_range(1..s).min(cols).min(3);
        let m = rng.random_range(4..=60);
        let d = ProblemDims::new(rows, cols, k, s, m)?;
        let x = random_feasible(&mut rng, &d);
        let xf = truncate_rank(&x, k)?;
        let op_seed = seed.wrapping_add(t as u64);
        let ops: [(Box<dyn MeasurementOperator>, &mut PropertyResult); 2] = [
            (Box::new(make_rank_one(&d, op_seed)), &mut rank_one),
            (Box::new(make_fourier_blind_deconv(&d, op_seed)), &mut fourier),
        ];
        for (op, result) in ops {
            let dense = op.to_dense();
            let fast_y = op.apply_factored(&xf)?;
            let slow_y = dense.apply(&x)?;
            let scale = slow_y.norm().max(1.0);
            result.case((&fast_y - &slow_y).norm() / scale, 1e-9);

            // residual-like vector in the range of A keeps the Fourier adjoint real
            let z = dense.apply(&uniform(&mut rng, rows, cols))?;
            let fast_t = op.projected_gradient(&xf, &z, z.norm())?.densify();
            let slow_t = tangent_project(&xf, &dense.adjoint(&z)?)?.densify();
            result.case((&fast_t - &slow_t).norm() / slow_t.norm().max(1.0), 1e-9);

            let y: DVector<f64> = dense.apply(&random_feasible(&mut rng, &d))?;
            let config = SolverConfig::new(Algorithm::Riht, d);
            let alpha = rng.random_range(0.1..1.0);
            let fast = fixed_step(op.as_ref(), &y, &config, &xf, alpha, 1)?.densify();
            let slow = dense_reference_step(&dense, &y, &x, &config, alpha, 1)?;
            result.case((&fast - &slow).norm() / slow.norm().max(1.0), 1e-9);
        }
    }
    Ok(vec![rank_one, fourier])
}

fn fourier_realness(instances: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut real = PropertyResult::new("Fourier normal operator maps real matrices to real matrices");
    for t in 0..instances {
        let (rows, cols, m) = (rng.random_range(2..=30), rng.random_range(2..=30), rng.random_range(2..=40));
        let d = ProblemDims::new(rows, cols, 1, 2, m)?;
        let op = make_fourier_blind_deconv(&d, seed ^ t as u64);
        let x = uniform(&mut rng, rows, 1) * uniform(&mut rng, 1, cols);
        let (re, im) = op.adjoint_complex(&op.apply(&x)?)?;
        real.case(im.norm() - 1e-10 * re.norm(), 0.0);
    }
    Ok(vec![real])
}

/// Runs every property on `instances` random cases each.
pub fn run_all(instances: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut out = projections(instances, seed)?;
    out.extend(prox(instances, seed.wrapping_add(1))?);
    out.extend(fast_paths(instances.div_ceil(10), seed.wrapping_add(2))?);
    out.extend(fourier_realness(instances.div_ceil(10), seed.wrapping_add(3))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for r in run_all(40, 9).unwrap() {
            assert!(r.passed(), "{}: {} of {} failed (worst {:e})", r.name, r.failures, r.cases, r.worst);
        }
    }
}
