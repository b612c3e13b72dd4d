use aqec_core::bound::{solve_bound, DEFAULT_BOUND_TOL};
use aqec_core::channel::{noise_rate_exact_ops, optimal_recovery_ops, recovery_rate};
use aqec_core::linalg::{c64, hermitian_coordinates, hermitian_from_coordinates, identity, CMatrix, HermitianSpan};
use aqec_core::model::{hnls_check, NoiseModel};
use aqec_core::oracle::{haar_unitary, trotter_qec_step};
use aqec_core::pipeline::{run_pipeline, PipelineOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d)
        .prop_map(move |v| CMatrix::from_fn(d, d, |i, j| c64(v[i * d + j].0, v[i * d + j].1)))
}

fn hermitian(d: usize) -> impl Strategy<Value = CMatrix> {
    matrix(d).prop_map(|a| (&a + a.adjoint()) * c64(0.5, 0.0))
}

/// Qubit models with the signal inside the Lindblad span.
fn sql_model() -> impl Strategy<Value = NoiseModel> {
    (hermitian(2), prop::collection::vec(matrix(2), 1..=2)).prop_filter_map(
        "signal must lie in the Lindblad span",
        |(h, ls)| {
            let m = NoiseModel::new(h, ls).ok()?;
            let sql = !hnls_check(&m, m.hnls_default_tol()).ok()?.hl_achievable;
            sql.then_some(m)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian_coordinates_round_trip(m in hermitian(3)) {
        let back = hermitian_from_coordinates(&hermitian_coordinates(&m), 3);
        prop_assert!((back - &m).norm() < 1e-12);
    }

    #[test]
    fn span_projection_splits_orthogonally(gens in prop::collection::vec(hermitian(3), 1..4), m in hermitian(3)) {
        let span = HermitianSpan::from_generators(3, gens.iter().cloned(), 1e-9).unwrap();
        let (inside, outside) = span.project(&m).unwrap();
        prop_assert!((&inside + &outside - &m).norm() < 1e-10);
        for b in span.basis() {
            prop_assert!((b.adjoint() * &outside).trace().norm() < 1e-10);
        }
    }

    #[test]
    fn bound_scales_quadratically_with_signal(model in sql_model(), c in 0.2..3.0f64) {
        let base = solve_bound(&model, DEFAULT_BOUND_TOL).unwrap().value;
        let scaled = model.with_hamiltonian(model.hamiltonian() * c64(c, 0.0)).unwrap();
        let value = solve_bound(&scaled, DEFAULT_BOUND_TOL).unwrap().value;
        prop_assert!((value - c * c * base).abs() <= 1e-6 * value.max(1.0), "{value} vs {}", c * c * base);
    }

    #[test]
    fn bound_scales_inversely_with_noise_rate(model in sql_model(), s in 0.2..3.0f64) {
        let base = solve_bound(&model, DEFAULT_BOUND_TOL).unwrap().value;
        let ls: Vec<CMatrix> = model.lindblads().iter().map(|l| l * c64(s.sqrt(), 0.0)).collect();
        let faster = NoiseModel::new(model.hamiltonian().clone(), ls).unwrap();
        let value = solve_bound(&faster, DEFAULT_BOUND_TOL).unwrap().value;
        prop_assert!((value * s - base).abs() <= 1e-6 * base.max(1.0));
    }

    #[test]
    fn bound_is_unitarily_covariant(model in sql_model(), seed in 0u64..1000) {
        let u = haar_unitary(2, &mut ChaCha8Rng::seed_from_u64(seed));
        let rot = |m: &CMatrix| &u * m * u.adjoint();
        let rotated = NoiseModel::new(rot(model.hamiltonian()), model.lindblads().iter().map(rot).collect()).unwrap();
        let a = solve_bound(&model, DEFAULT_BOUND_TOL).unwrap().value;
        let b = solve_bound(&rotated, DEFAULT_BOUND_TOL).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0));
    }

    #[test]
    fn pipeline_code_is_consistent(model in sql_model()) {
        let r = run_pipeline(&model, &PipelineOptions::default()).unwrap();
        let (z, o) = (&r.code.logical_zero, &r.code.logical_one);
        prop_assert!((z.norm() - 1.0).abs() < 1e-12 && (o.norm() - 1.0).abs() < 1e-12);
        prop_assert!(z.dotc(o).norm() < 1e-12);
        let n = r.recovery.completeness().nrows();
        prop_assert!((r.recovery.completeness() - identity(n)).norm() < 1e-10);
        // The optimal recovery attains the minimal rate, and no more.
        let ops = model.lindblads();
        let direct = recovery_rate(&r.code, &ops, &optimal_recovery_ops(&r.code, &ops).unwrap());
        let exact = noise_rate_exact_ops(&r.code, &ops).unwrap();
        prop_assert!((direct - exact).abs() <= 1e-12 + 1e-9 * exact.abs());
        prop_assert!(r.duality_gap <= 1e-5 * r.dual.value);
    }

    #[test]
    fn trotter_step_preserves_trace(model in sql_model(), dt in 1e-5..1e-3f64, omega in -2.0..2.0f64) {
        let r = run_pipeline(&model, &PipelineOptions::default()).map_err(|e| TestCaseError::fail(format!("{e} on {model:?}")))?;
        let plus = (&r.code.logical_zero + &r.code.logical_one) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho = &plus * plus.adjoint();
        let step = trotter_qec_step(&rho, &model, &r.code, &r.recovery, dt, omega).unwrap();
        prop_assert!(step.trace_error < 1e-12);
        let back = step.rho.adjoint() - &step.rho;
        prop_assert!(back.norm() < 1e-12);
    }
}
