use std::hint::black_box;

use aqec_core::bound::{solve_bound, DEFAULT_BOUND_TOL};
use aqec_core::dephasing::{build_dephasing_model, reference_spec};
use aqec_core::linalg::{c64, pauli_x, pauli_y, pauli_z, CMatrix};
use aqec_core::model::NoiseModel;
use aqec_core::oracle::brute_force_recovery;
use aqec_core::pipeline::{run_pipeline, PipelineOptions};
use criterion::{criterion_group, criterion_main, Criterion};

fn dephasing_qubit() -> NoiseModel {
    NoiseModel::new(pauli_z(), vec![pauli_z() * c64(0.5_f64.sqrt(), 0.0)]).unwrap()
}

/// Fixed generic qubit model with two noise channels.
fn generic_qubit() -> NoiseModel {
    let h = pauli_x() * c64(0.3, 0.0) + pauli_z() * c64(0.8, 0.0);
    let l1 = CMatrix::from_row_slice(2, 2, &[c64(0.4, 0.1), c64(0.2, -0.3), c64(-0.1, 0.5), c64(0.3, 0.0)]);
    let l2 = pauli_y() * c64(0.35, 0.0) + pauli_z() * c64(0.1, 0.2);
    NoiseModel::new(h, vec![l1, l2]).unwrap()
}

fn bound(c: &mut Criterion) {
    let mut g = c.benchmark_group("bound");
    let qubit = generic_qubit();
    g.bench_function("generic_qubit", |b| b.iter(|| solve_bound(black_box(&qubit), DEFAULT_BOUND_TOL).unwrap()));
    let n3 = build_dephasing_model(&reference_spec()).unwrap();
    g.sample_size(10);
    g.bench_function("correlated_dephasing_n3", |b| b.iter(|| solve_bound(black_box(&n3), DEFAULT_BOUND_TOL).unwrap()));
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    let opts = PipelineOptions::default();
    let dephasing = dephasing_qubit();
    g.bench_function("dephasing_qubit", |b| b.iter(|| run_pipeline(black_box(&dephasing), &opts).unwrap()));
    let qubit = generic_qubit();
    g.bench_function("generic_qubit", |b| b.iter(|| run_pipeline(black_box(&qubit), &opts).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let model = generic_qubit();
    let r = run_pipeline(&model, &PipelineOptions::default()).unwrap();
    let ops = model.lindblads();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("brute_force_recovery_500", |b| {
        b.iter(|| brute_force_recovery(black_box(&r.code), &ops, 500, 1, 1e-6).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bound, pipeline, oracle);
criterion_main!(benches);
