//! Parallel versus sequential execution of the two embarrassingly parallel
//! workloads: independent phase-transition trials and support enumeration.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sparselow::harness::{run_phase_transition, ExperimentSpec};
use sparselow::oracle::{exact_projection_with, OracleBudget};
use sparselow::par::Parallelism;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn phase_trials(c: &mut Criterion) {
    let mut spec = ExperimentSpec::preset("fig1-desk").unwrap();
    spec.rows = 60;
    spec.s_values = vec![8];
    spec.m_values = vec![120, 240];
    spec.trials = 4;
    spec.solvers.truncate(2);
    let mut group = c.benchmark_group("phase_trials");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| run_phase_transition(black_box(&spec), mode).unwrap()));
    }
    group.finish();
}

fn support_enumeration(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = DMatrix::from_fn(16, 6, |_, _| StandardNormal.sample(&mut rng));
    let mut group = c.benchmark_group("exact_projection_16_choose_5");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| exact_projection_with(black_box(&x), 2, 5, OracleBudget::default(), mode).unwrap())
        });
    }
    group.finish();
}

// the plotters backend can stall while rendering; numbers are all we need
criterion_group! {
    name = benches;
    config = Criterion::default().without_plots();
    targets = phase_trials, support_enumeration
}
criterion_main!(benches);
