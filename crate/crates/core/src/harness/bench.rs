use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dims::{ProblemDims, SupportSet};
use crate::error::{Error, Result};
use crate::factored::FactoredMatrix;
use crate::operators::{BackendKind, MeasurementOperator, OperatorSpec};
use crate::tangent::tangent_project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchOp {
    Apply,
    Adjoint,
    ProjectedAdjoint,
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchOp::Apply => "apply",
            BenchOp::Adjoint => "adjoint",
            BenchOp::ProjectedAdjoint => "projected-adjoint",
        })
    }
}

impl FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apply" => Ok(BenchOp::Apply),
            "adjoint" => Ok(BenchOp::Adjoint),
            "projected-adjoint" => Ok(BenchOp::ProjectedAdjoint),
            other => Err(Error::Parameter(format!(
                "unknown operation '{other}' (expected apply, adjoint or projected-adjoint)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    /// `M = N`.
    pub size: usize,
    /// Factored path: `apply_factored`, `adjoint`, `projected_adjoint`.
    pub fast_ms: f64,
    /// Path through a dense `M × N` matrix (`apply` of the densified
    /// iterate, or `P_T` of the full adjoint); absent for `adjoint`.
    pub dense_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub op: BenchOp,
    pub backend: BackendKind,
    pub rank: usize,
    pub measurements: usize,
    pub rows: Vec<ScalingRow>,
    pub fast_exponent: f64,
    pub dense_exponent: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), (x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

/// Median over `reps` samples of the per-call time, each sample repeating
/// `f` until at least 20 ms have elapsed.
pub fn time_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            let mut calls = 0u32;
            loop {
                f();
                calls += 1;
                if start.elapsed().as_secs_f64() >= 0.02 {
                    break;
                }
            }
            start.elapsed().as_secs_f64() * 1e3 / calls as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

fn random_point(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<FactoredMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = |r: usize, c: usize| -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
    };
    let u = g(rows, rank).qr().q();
    let v = g(cols, rank).qr().q();
    let sigma = DVector::from_fn(rank, |i, _| (rank - i) as f64);
    FactoredMatrix::from_parts(u, sigma, v, SupportSet::full(rows))
}

/// Times `op` on `M = N = size` for each size at fixed rank and measurement
/// count, and fits the scaling exponent in `M`.
pub fn scaling_benchmark(
    op: BenchOp,
    backend: BackendKind,
    sizes: &[usize],
    rank: usize,
    measurements: usize,
    reps: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if sizes.len() < 2 {
        return Err(Error::Parameter("need at least two sizes to fit an exponent".into()));
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let dims = ProblemDims::new(size, size, rank, size, measurements)?;
        let operator: Box<dyn MeasurementOperator> = OperatorSpec::new(backend, &dims, seed).build()?;
        let x = random_point(size, size, rank, seed ^ 0xbe7c)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a);
        let z = DVector::from_fn(operator.output_len(), |_, _| StandardNormal.sample(&mut rng));
        let (fast_ms, dense_ms) = match op {
            BenchOp::Apply => {
                let dense_x = x.densify();
                let fast = time_ms(reps, || {
                    std::hint::black_box(operator.apply_factored(&x).expect("bench apply"));
                });
                let dense = time_ms(reps, || {
                    std::hint::black_box(operator.apply(&dense_x).expect("bench apply"));
                });
                (fast, Some(dense))
            }
            BenchOp::Adjoint => {
                let fast = time_ms(reps, || {
                    std::hint::black_box(operator.adjoint(&z).expect("bench adjoint"));
                });
                (fast, None)
            }
            BenchOp::ProjectedAdjoint => {
                let fast = time_ms(reps, || {
                    std::hint::black_box(operator.projected_adjoint(&x, &z).expect("bench projected"));
                });
                let dense = time_ms(reps, || {
                    let g = operator.adjoint(&z).expect("bench adjoint");
                    std::hint::black_box(tangent_project(&x, &g).expect("bench projection"));
                });
                (fast, Some(dense))
            }
        };
        rows.push(ScalingRow {
            size,
            fast_ms,
            dense_ms,
        });
    }
    let fast: Vec<(f64, f64)> = rows.iter().map(|r| (r.size as f64, r.fast_ms)).collect();
    let dense: Option<Vec<(f64, f64)>> = rows
        .iter()
        .map(|r| r.dense_ms.map(|d| (r.size as f64, d)))
        .collect();
    Ok(ScalingReport {
        op,
        backend,
        rank,
        measurements,
        fast_exponent: loglog_slope(&fast),
        dense_exponent: dense.map(|d| loglog_slope(&d)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(1.5))).collect();
        assert!((loglog_slope(&pts) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn small_benchmark_runs() {
        let r = scaling_benchmark(BenchOp::ProjectedAdjoint, BackendKind::RankOne, &[20, 40], 2, 30, 1, 0).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.fast_ms > 0.0 && row.dense_ms.unwrap() > 0.0));
    }
}
