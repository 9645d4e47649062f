use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dims::{ProblemDims, SupportSet};
use crate::error::Result;
use crate::factored::FactoredMatrix;
use crate::operators::{BackendKind, MeasurementOperator, OperatorSpec};
use crate::projection::truncate_rank;

/// SplitMix64 finalizer; decorrelates nearby seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Operator and ground-truth seeds of one trial in a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub operator: u64,
    pub truth: u64,
}

impl TrialSeeds {
    pub fn derive(seed_base: u64, dims: &ProblemDims, trial: usize) -> Self {
        let key = [
            dims.measurements as u64,
            dims.sparsity as u64,
            dims.cols as u64,
            trial as u64,
        ]
        .iter()
        .fold(mix(seed_base), |acc, v| mix(acc ^ v));
        TrialSeeds {
            operator: mix(key ^ 0x6f70),
            truth: mix(key ^ 0x7472),
        }
    }
}

/// `X* ∈ M_{k,s}` with a uniformly random support and Gaussian factors,
/// together with its measurements.
pub struct GroundTruthInstance {
    pub dims: ProblemDims,
    pub operator_spec: OperatorSpec,
    pub truth_seed: u64,
    pub truth: FactoredMatrix,
    pub operator: Box<dyn MeasurementOperator>,
    pub y: DVector<f64>,
}

/// Random support of size `s` and `X_S = L R` with `L` (`s × k`) and `R`
/// (`k × N`) i.i.d. `N(0, 1)`.
pub fn random_truth(dims: &ProblemDims, seed: u64) -> Result<FactoredMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: SupportSet = rand::seq::index::sample(&mut rng, dims.rows, dims.sparsity)
        .into_iter()
        .collect();
    let mut normal = |r: usize, c: usize| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        m
    };
    let left = normal(dims.sparsity, dims.rank);
    let right = normal(dims.rank, dims.cols);
    let block = left * right;
    let mut x = DMatrix::zeros(dims.rows, dims.cols);
    for (r, i) in support.iter().enumerate() {
        x.set_row(i, &block.row(r));
    }
    truncate_rank(&x, dims.rank)
}

impl GroundTruthInstance {
    pub fn generate(backend: BackendKind, dims: ProblemDims, seeds: TrialSeeds) -> Result<Self> {
        dims.validate()?;
        let operator_spec = OperatorSpec::new(backend, &dims, seeds.operator);
        let operator = operator_spec.build()?;
        let truth = random_truth(&dims, seeds.truth)?;
        let y = operator.apply_factored(&truth)?;
        Ok(GroundTruthInstance {
            dims,
            operator_spec,
            truth_seed: seeds.truth,
            truth,
            operator,
            y,
        })
    }
}
