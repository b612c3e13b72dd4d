//! Logical dephasing channel induced by a perturbation code under fast
//! error correction: the optimal recovery, its dephasing rate, and the
//! resulting normalized QFI.
//!
//! Rates follow the convention that the logical coherence `⟨0_L|ρ|1_L⟩`
//! decays as `e^{−γt}`, so the normalized QFI is `signal²/(2γ)`.

use serde::Serialize;

use crate::code::{GaugeFrame, PerturbationCode};
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, kron, svd, trace_norm, trace_product, CMatrix, CVector};
use crate::model::NoiseModel;

/// Lifts a probe operator to the `2d²`-dimensional code space.
pub fn lift(op: &CMatrix) -> CMatrix {
    let d = op.nrows();
    kron(op, &identity(2 * d))
}

/// Components of `v` carrying the given `𝓗₂` tag, as a `d²` vector.
fn tag_block(v: &CVector, tag: usize) -> CVector {
    CVector::from_fn(v.len() / 2, |k, _| v[2 * k + tag])
}

fn untag(v: &CVector, tag: usize) -> CVector {
    let mut out = CVector::zeros(2 * v.len());
    for k in 0..v.len() {
        out[2 * k + tag] = v[k];
    }
    out
}

/// Columns `⟨0|₂P⊥J_i|0_L⟩` and `⟨1|₂P⊥J_i|1_L⟩` (each `d²×r`), plus the
/// in-code amplitudes `⟨0_L|J_i|0_L⟩`, `⟨1_L|J_i|1_L⟩`.
struct ErrorVectors {
    a: CMatrix,
    b: CMatrix,
    diag0: CVector,
    diag1: CVector,
}

fn error_vectors(code: &PerturbationCode, ops: &[CMatrix]) -> ErrorVectors {
    let d = code.probe_dim();
    let p = code.projector();
    let pperp = identity(2 * d * d) - &p;
    let r = ops.len();
    let mut a = CMatrix::zeros(d * d, r);
    let mut b = CMatrix::zeros(d * d, r);
    let mut diag0 = CVector::zeros(r);
    let mut diag1 = CVector::zeros(r);
    for (i, j) in ops.iter().enumerate() {
        let big = lift(j);
        let j0 = &big * &code.logical_zero;
        let j1 = &big * &code.logical_one;
        diag0[i] = code.logical_zero.dotc(&j0);
        diag1[i] = code.logical_one.dotc(&j1);
        a.set_column(i, &tag_block(&(&pperp * j0), 0));
        b.set_column(i, &tag_block(&(&pperp * j1), 1));
    }
    ErrorVectors { a, b, diag0, diag1 }
}

/// `M = Σ_i ⟨0|₂ P⊥J_i|0_L⟩⟨1_L|J_i†P⊥ |1⟩₂`, a `d²×d²` matrix.
pub fn recovery_matrix(code: &PerturbationCode, ops: &[CMatrix]) -> CMatrix {
    let ev = error_vectors(code, ops);
    &ev.a * ev.b.adjoint()
}

/// Minimum dephasing rate over structured recoveries, for any operator list
/// (the rate is invariant under the gauge freedom).
///
/// Evaluated as `½Σ|⟨0_L|J_i|0_L⟩ − ⟨1_L|J_i|1_L⟩|² + ½ min_W ‖A − WB‖²_F`,
/// which equals the trace-norm closed form but avoids cancelling O(1)
/// terms when γ is O(ε²).
pub fn noise_rate_exact_ops(code: &PerturbationCode, ops: &[CMatrix]) -> Result<f64> {
    let ev = error_vectors(code, ops);
    let in_code: f64 = (&ev.diag0 - &ev.diag1).norm_squared();
    let m = &ev.a * ev.b.adjoint();
    let dec = svd(&m)?;
    let w = &dec.u * dec.v.adjoint();
    let residual = (&ev.a - w * &ev.b).norm_squared();
    Ok(0.5 * (in_code + residual))
}

pub fn noise_rate_exact(code: &PerturbationCode, frame: &GaugeFrame) -> Result<f64> {
    noise_rate_exact_ops(code, &frame.j)
}

/// The same rate in its direct form
/// `−‖M‖₁ − Σ_i Re[⟨0_L|J_i|0_L⟩⟨1_L|J_i†|1_L⟩ − ½⟨0_L|J_i†J_i|0_L⟩ − ½⟨1_L|J_i†J_i|1_L⟩]`,
/// clamped at zero.
pub fn noise_rate_closed_form(code: &PerturbationCode, ops: &[CMatrix]) -> Result<f64> {
    let mut g = 0.0;
    for j in ops {
        let big = lift(j);
        let j0 = &big * &code.logical_zero;
        let j1 = &big * &code.logical_one;
        let a = code.logical_zero.dotc(&j0);
        let b = code.logical_one.dotc(&j1);
        g += 0.5 * (j0.norm_squared() + j1.norm_squared()) - (a * b.conj()).re;
    }
    g -= trace_norm(&recovery_matrix(code, ops))?;
    Ok(g.max(0.0))
}

/// Leading-order rate `ε²(Σ 2|Tr(J_iC̃)|² + Σ_{λ_i+λ_j>0} |Tr(J_i†J_jC̃)|²/(λ_i+λ_j))`.
pub fn noise_rate_perturbative(frame: &GaugeFrame, ctilde: &CMatrix, epsilon: f64) -> f64 {
    let (lin, quad) = rate_terms(frame, ctilde);
    epsilon * epsilon * (2.0 * lin + 2.0 * quad)
}

/// `(Σ|Tr(J_iC̃)|², Σ|Tr(J_i†J_jC̃)|²/(2(λ_i+λ_j)))`.
fn rate_terms(frame: &GaugeFrame, ctilde: &CMatrix) -> (f64, f64) {
    let lin = frame.j.iter().map(|j| trace_product(j, ctilde).norm_sqr()).sum();
    let scale = frame.lambda.first().copied().unwrap_or(0.0).max(1.0);
    let mut quad = 0.0;
    for (i, ji) in frame.j.iter().enumerate() {
        for (k, jk) in frame.j.iter().enumerate() {
            let s = frame.lambda[i] + frame.lambda[k];
            if s > crate::linalg::DEFAULT_RANK_TOL * scale {
                quad += trace_product(&(ji.adjoint() * jk), ctilde).norm_sqr() / (2.0 * s);
            }
        }
    }
    (lin, quad)
}

/// `Tr(HC̃)² / (Σ|Tr(J_iC̃)|² + Σ|Tr(J_i†J_jC̃)|²/(2(λ_i+λ_j)))`; infinite
/// when the denominator vanishes but the numerator does not.
pub fn normalized_qfi(frame: &GaugeFrame, ctilde: &CMatrix, h: &CMatrix) -> f64 {
    let num = trace_product(h, ctilde).re.powi(2);
    let (lin, quad) = rate_terms(frame, ctilde);
    let den = lin + quad;
    if num == 0.0 {
        0.0
    } else if den <= 1e-300 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Kraus operators `K_m = |0_L⟩⟨R_m,0| + |1_L⟩⟨S_m,1|` on the `2d²` space.
#[derive(Debug, Clone)]
pub struct RecoveryChannel {
    pub kraus: Vec<CMatrix>,
    pub r: Vec<CVector>,
    pub s: Vec<CVector>,
}

impl RecoveryChannel {
    /// Builds the channel from `W = Σ_m |S_m⟩⟨R_m|` using `R_m = |m⟩`.
    pub fn from_unitary(code: &PerturbationCode, w: &CMatrix) -> Self {
        let n = w.nrows();
        let r: Vec<CVector> =
            (0..n).map(|m| CVector::from_fn(n, |k, _| c64(if k == m { 1.0 } else { 0.0 }, 0.0))).collect();
        let s: Vec<CVector> = (0..n).map(|m| w.column(m).into_owned()).collect();
        Self::from_bases(code, r, s)
    }

    pub fn from_bases(code: &PerturbationCode, r: Vec<CVector>, s: Vec<CVector>) -> Self {
        let kraus = r
            .iter()
            .zip(&s)
            .map(|(rm, sm)| &code.logical_zero * untag(rm, 0).adjoint() + &code.logical_one * untag(sm, 1).adjoint())
            .collect();
        Self { kraus, r, s }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    pub fn completeness(&self) -> CMatrix {
        let n = self.kraus.first().map_or(0, |k| k.ncols());
        let mut out = CMatrix::zeros(n, n);
        for k in &self.kraus {
            out += k.adjoint() * k;
        }
        out
    }
}

/// Recovery attaining the minimum rate: with `M = UΣV†`, `R_m = U|m⟩` and
/// `S_m = V|m⟩`, so `Re Tr(M Σ|S_m⟩⟨R_m|) = ‖M‖₁`.
pub fn optimal_recovery(code: &PerturbationCode, frame: &GaugeFrame) -> Result<RecoveryChannel> {
    optimal_recovery_ops(code, &frame.j)
}

pub fn optimal_recovery_ops(code: &PerturbationCode, ops: &[CMatrix]) -> Result<RecoveryChannel> {
    let m = recovery_matrix(code, ops);
    let dec = svd(&m)?;
    let n = m.nrows();
    let r = (0..n).map(|k| dec.u.column(k).into_owned()).collect();
    let s = (0..n).map(|k| dec.v.column(k).into_owned()).collect();
    Ok(RecoveryChannel::from_bases(code, r, s))
}

/// Coherence decay rate for a given recovery, evaluated directly on the
/// full space: `−Re⟨0_L|(𝒫 + ℛ∘𝒫⊥)(𝒟(|0_L⟩⟨1_L|))|1_L⟩`, where `𝒟` is the
/// dissipative part of the Lindbladian.
pub fn recovery_rate(code: &PerturbationCode, ops: &[CMatrix], recovery: &RecoveryChannel) -> f64 {
    let d = code.probe_dim();
    let n = 2 * d * d;
    let p = code.projector();
    let pperp = identity(n) - &p;
    let sigma = &code.logical_zero * code.logical_one.adjoint();
    let mut diss = CMatrix::zeros(n, n);
    for j in ops {
        let big = lift(j);
        let jd = big.adjoint();
        let jj = &jd * &big;
        diss += &big * &sigma * &jd - (&jj * &sigma + &sigma * &jj) * c64(0.5, 0.0);
    }
    let corrected = &p * &diss * &p + recovery.apply(&(&pperp * &diss * &pperp));
    let coherence = (code.logical_zero.adjoint() * corrected * &code.logical_one)[(0, 0)];
    -coherence.re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveChannel {
    /// `⟨0_L|H|0_L⟩ − ⟨1_L|H|1_L⟩`.
    pub signal: f64,
    pub gamma: f64,
    /// `signal²/(2γ)`; infinite when `divergent`.
    pub qfi_normalized: f64,
    pub divergent: bool,
}

/// Below this the rate is treated as zero and the QFI reported divergent.
pub const GAMMA_FLOOR: f64 = 1e-14;

pub fn effective_params(code: &PerturbationCode, model: &NoiseModel, recovery: &RecoveryChannel) -> EffectiveChannel {
    let signal = trace_product(model.hamiltonian(), &(&code.a0 * code.a0.adjoint() - &code.a1 * code.a1.adjoint())).re;
    let gamma = recovery_rate(code, &model.lindblads(), recovery);
    effective_from(signal, gamma)
}

pub(crate) fn effective_from(signal: f64, gamma: f64) -> EffectiveChannel {
    if gamma <= GAMMA_FLOOR {
        EffectiveChannel { signal, gamma: gamma.max(0.0), qfi_normalized: f64::INFINITY, divergent: true }
    } else {
        EffectiveChannel { signal, gamma, qfi_normalized: signal * signal / (2.0 * gamma), divergent: false }
    }
}

/// Validates that a state lies in the code space.
pub fn check_in_code(code: &PerturbationCode, rho: &CMatrix, tol: f64) -> Result<()> {
    let p = code.projector();
    let leakage = (rho - &p * rho * &p).norm();
    if leakage > tol {
        Err(Error::Domain { leakage })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{assemble_code, gauge_transform_ops};
    use crate::linalg::{hs_norm, pauli_x, pauli_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dephasing_setup(kappa: f64, eps: f64) -> (PerturbationCode, GaugeFrame, NoiseModel) {
        let model = NoiseModel::new(pauli_z(), vec![pauli_z() * c64(kappa.sqrt(), 0.0)]).unwrap();
        let frame = gauge_transform_ops(&model.lindblads(), &(identity(2) * c64(0.5, 0.0))).unwrap();
        let c = identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let code = assemble_code(&c, &pauli_z(), eps, 0.0).unwrap();
        (code, frame, model)
    }

    #[test]
    fn perturbative_rate_for_dephasing() {
        let kappa: f64 = 0.5;
        let model = NoiseModel::new(pauli_z(), vec![pauli_z() * c64(kappa.sqrt(), 0.0)]).unwrap();
        let frame = gauge_transform_ops(&model.lindblads(), &(identity(2) * c64(0.5, 0.0))).unwrap();
        let ct = pauli_z() * c64(1.0 / (2.0 * kappa), 0.0);
        let eps = 1e-3;
        let g = noise_rate_perturbative(&frame, &ct, eps);
        assert!((g - 2.0 * eps * eps / kappa).abs() < 1e-18);
        let g2 = noise_rate_perturbative(&frame, &ct, 2.0 * eps);
        assert_eq!(g2 / g, 4.0);
        assert_eq!(noise_rate_perturbative(&frame, &pauli_x(), eps), 0.0);
        assert!((normalized_qfi(&frame, &ct, &pauli_z()) - 1.0 / kappa).abs() < 1e-12);
    }

    #[test]
    fn dephasing_exact_matches_perturbative_and_recovery() {
        let kappa = 0.5;
        for eps in [1e-2, 1e-3] {
            let (code, frame, model) = dephasing_setup(kappa, eps);
            let exact = noise_rate_exact(&code, &frame).unwrap();
            assert!((noise_rate_closed_form(&code, &frame.j).unwrap() - exact).abs() < 1e-12);
            let pert = noise_rate_perturbative(&frame, &code.ctilde, eps);
            assert!(((exact - pert) / (eps * eps)).abs() < 10.0 * eps * pert / (eps * eps), "{exact} {pert}");
            let rec = optimal_recovery(&code, &frame).unwrap();
            assert!((recovery_rate(&code, &frame.j, &rec) - exact).abs() < 1e-10);
            let eff = effective_params(&code, &model, &rec);
            assert!((eff.qfi_normalized - 1.0 / kappa).abs() < 1e-2);
        }
    }

    #[test]
    fn recovery_is_complete_and_orthonormal() {
        let (code, frame, _) = dephasing_setup(0.3, 1e-2);
        let rec = optimal_recovery(&code, &frame).unwrap();
        let n = code.logical_zero.len();
        assert!(hs_norm(&(rec.completeness() - identity(n))) < 1e-10);
    }

    #[test]
    fn gamma_ignores_hamiltonian_scale() {
        let (code, frame, model) = dephasing_setup(0.3, 1e-2);
        let rec = optimal_recovery(&code, &frame).unwrap();
        let a = effective_params(&code, &model, &rec);
        let scaled = model.with_hamiltonian(pauli_z() * c64(3.0, 0.0)).unwrap();
        let b = effective_params(&code, &scaled, &rec);
        assert_eq!(a.gamma, b.gamma);
        assert!((b.signal - 3.0 * a.signal).abs() < 1e-15);
    }

    #[test]
    fn signal_identity_before_normalization() {
        let (code, _, model) = dephasing_setup(0.3, 1e-2);
        let plus = &code.c + &code.d * c64(code.epsilon, 0.0);
        let minus = &code.c - &code.d * c64(code.epsilon, 0.0);
        let raw = trace_product(model.hamiltonian(), &(&plus * plus.adjoint() - &minus * minus.adjoint())).re;
        let expect = 2.0 * code.epsilon * trace_product(model.hamiltonian(), &code.ctilde).re;
        assert!((raw - expect).abs() < 1e-15);
    }

    #[test]
    fn optimal_recovery_beats_random_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = CMatrix::from_fn(2, 2, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let ops = vec![pauli_z(), g * c64(0.5, 0.0)];
        let x = identity(2) * c64(0.5, 0.0);
        let frame = gauge_transform_ops(&ops, &x).unwrap();
        let c = identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let code = assemble_code(&c, &pauli_x(), 0.05, 0.0).unwrap();
        let exact = noise_rate_exact(&code, &frame).unwrap();
        let n = 4;
        for _ in 0..200 {
            let a = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let q = a.qr().q();
            let rec = RecoveryChannel::from_unitary(&code, &q);
            assert!(recovery_rate(&code, &ops, &rec) >= exact - 1e-12);
        }
    }
}
