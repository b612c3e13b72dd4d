//! End-to-end runs: bound → code support → gauge frame → optimal `C̃` →
//! perturbation code → optimal recovery → effective channel.

use serde::Serialize;

use crate::biased::{biased_frame, kl_residual, optimal_ctilde_biased, qfi_bar, BiasedFrame};
use crate::bound::{solve_bound, solve_bound_biased, DualSolution, DEFAULT_BOUND_TOL};
use crate::channel::{
    effective_params, noise_rate_exact_ops, noise_rate_perturbative, normalized_qfi, optimal_recovery_ops,
    EffectiveChannel, RecoveryChannel,
};
use crate::code::{
    assemble_code, directions_for, gauge_transform, is_singular, optimal_ctilde, solve_code_support, CodeSupport,
    GaugeFrame, PerturbationCode, DEFAULT_DELTA, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DEFAULT_RANK_TOL};
use crate::model::NoiseModel;

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub tol_sdp: f64,
    pub tol_rank: f64,
    pub epsilon: f64,
    /// `None` picks `DEFAULT_DELTA` when the optimal `C` is singular and
    /// zero otherwise.
    pub delta: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { tol_sdp: DEFAULT_BOUND_TOL, tol_rank: DEFAULT_RANK_TOL, epsilon: DEFAULT_EPSILON, delta: None }
    }
}

impl PipelineOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_sdp > 0.0 && self.tol_rank > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `(δ, ε)` actually used for a support factor `C`. With automatic δ on a
/// singular `C`, ε is clamped to `δ²/10`.
pub fn resolve_regularization(c: &CMatrix, options: &PipelineOptions) -> Result<(f64, f64)> {
    let singular = is_singular(c, options.tol_rank)?;
    match options.delta {
        Some(delta) => Ok((delta, options.epsilon)),
        None if singular => Ok((DEFAULT_DELTA, options.epsilon.min(DEFAULT_DELTA * DEFAULT_DELTA / 10.0))),
        None => Ok((0.0, options.epsilon)),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub dual: DualSolution,
    pub support: CodeSupport,
    /// Frame at the optimal support.
    pub frame: GaugeFrame,
    /// Optimal `C̃` (unnormalized).
    pub ctilde: CMatrix,
    /// `⟨⟨H^h|B⁺|H^h⟩⟩`.
    pub qfi_dual: f64,
    /// Normalized QFI of `(C⋄, C̃⋄)` from the rate formula.
    pub qfi_formula: f64,
    /// `|qfi_formula − bound|`.
    pub duality_gap: f64,
    pub code: PerturbationCode,
    /// Frame at the (possibly regularized) code's support.
    pub code_frame: GaugeFrame,
    pub recovery: RecoveryChannel,
    pub gamma_exact: f64,
    pub gamma_perturbative: f64,
    pub effective: EffectiveChannel,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub bound: f64,
    pub qfi_normalized: f64,
    pub gamma: f64,
    pub gamma_perturbative: f64,
    pub signal: f64,
    pub duality_gap: f64,
    pub qfi_dual: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub reduced_precision: bool,
    pub divergent: bool,
}

impl PipelineResult {
    pub fn summary(&self) -> PipelineSummary {
        PipelineSummary {
            bound: self.dual.value,
            qfi_normalized: self.effective.qfi_normalized,
            gamma: self.effective.gamma,
            gamma_perturbative: self.gamma_perturbative,
            signal: self.effective.signal,
            duality_gap: self.duality_gap,
            qfi_dual: self.qfi_dual,
            epsilon: self.code.epsilon,
            delta: self.code.delta,
            reduced_precision: self.dual.reduced_precision,
            divergent: self.effective.divergent,
        }
    }
}

pub fn run_pipeline(model: &NoiseModel, options: &PipelineOptions) -> Result<PipelineResult> {
    options.validate()?;
    let dual = solve_bound(model, options.tol_sdp)?;
    let dirs = directions_for(&dual.lagrangian);
    let support = solve_code_support(&dual, &dirs, options.tol_sdp)?;
    let frame = gauge_transform(model, &support.x)?;
    let h = model.hamiltonian();
    let (ctilde, qfi_dual) = optimal_ctilde(&frame, h)?;
    let qfi_formula = normalized_qfi(&frame, &ctilde, h);
    let duality_gap = (qfi_formula - dual.value).abs();

    let (delta, epsilon) = resolve_regularization(&support.c, options)?;
    let code = build_code(model, &support.c, &ctilde, epsilon, delta)?;
    Ok(PipelineResult {
        dual,
        support,
        frame,
        ctilde,
        qfi_dual,
        qfi_formula,
        duality_gap,
        code: code.code,
        code_frame: code.frame,
        recovery: code.recovery,
        gamma_exact: code.gamma_exact,
        gamma_perturbative: code.gamma_perturbative,
        effective: code.effective,
    })
}

/// A code with its recovery and rates, for one `(ε, δ)`.
#[derive(Debug, Clone)]
pub struct BuiltCode {
    pub code: PerturbationCode,
    pub frame: GaugeFrame,
    pub recovery: RecoveryChannel,
    pub gamma_exact: f64,
    pub gamma_perturbative: f64,
    pub effective: EffectiveChannel,
}

pub fn build_code(model: &NoiseModel, c: &CMatrix, ctilde: &CMatrix, epsilon: f64, delta: f64) -> Result<BuiltCode> {
    let code = assemble_code(c, ctilde, epsilon, delta)?;
    let x = &code.c * code.c.adjoint();
    let frame = gauge_transform(model, &x)?;
    let ops = model.lindblads();
    let recovery = optimal_recovery_ops(&code, &ops)?;
    let gamma_exact = noise_rate_exact_ops(&code, &ops)?;
    let gamma_perturbative = noise_rate_perturbative(&frame, &code.ctilde, code.epsilon);
    let effective = effective_params(&code, model, &recovery);
    Ok(BuiltCode { code, frame, recovery, gamma_exact, gamma_perturbative, effective })
}

#[derive(Debug, Clone)]
pub struct BiasedResult {
    pub dual: DualSolution,
    pub support: CodeSupport,
    pub frame: BiasedFrame,
    pub ctilde: CMatrix,
    /// `4‖ᾱ⋄‖`, the η-independent leading coefficient.
    pub bound_bar: f64,
    /// `4‖ᾱ⋄‖/η`.
    pub asymptotic: f64,
    /// 𝔉̄ at the optimal `C̃`.
    pub qfi_bar: f64,
    pub constraints_ok: bool,
    /// Largest Knill–Laflamme trace over the strong operators, relative to
    /// `‖C̃‖_HS`.
    pub kl_residual: f64,
}

pub fn run_biased(model: &NoiseModel, options: &PipelineOptions) -> Result<BiasedResult> {
    options.validate()?;
    let bias = model
        .bias()
        .ok_or_else(|| Error::Validation("biased pipeline requires a strong/weak partition".into()))?
        .clone();
    let dual = solve_bound_biased(model, options.tol_sdp)?;
    let dirs = directions_for(&dual.lagrangian);
    let support = solve_code_support(&dual, &dirs, options.tol_sdp)?;
    let frame = biased_frame(model, &support.x)?;
    let h = model.hamiltonian();
    let (ctilde, _) = optimal_ctilde_biased(&frame, h)?;
    let nrm = crate::linalg::hs_norm(&ctilde);
    let q = qfi_bar(&frame, &ctilde, h, 1e-7)?;
    let strong: Vec<CMatrix> = bias.strong.iter().map(|&i| model.base_lindblads()[i].clone()).collect();
    Ok(BiasedResult {
        bound_bar: dual.value,
        asymptotic: dual.value / bias.eta,
        qfi_bar: q.value,
        constraints_ok: q.constraints_ok,
        kl_residual: kl_residual(&ctilde, &strong) / nrm,
        dual,
        support,
        frame,
        ctilde,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaPoint {
    pub eta: f64,
    /// Full bound on the η-scaled model.
    pub bound_full: f64,
    pub eta_times_full: f64,
    /// `4‖ᾱ⋄‖`.
    pub bound_bar: f64,
    pub ratio: f64,
}

/// Full bound at each η against the leading-order coefficient.
pub fn eta_sweep(model: &NoiseModel, etas: &[f64], tol: f64) -> Result<Vec<EtaPoint>> {
    let bias =
        model.bias().ok_or_else(|| Error::Validation("η sweep requires a strong/weak partition".into()))?.clone();
    let bar = solve_bound_biased(model, tol)?.value;
    etas.iter()
        .map(|&eta| {
            let m = model.make_biased(&bias.strong, &bias.weak, eta)?;
            let full = solve_bound(&m, tol)?.value;
            Ok(EtaPoint { eta, bound_full: full, eta_times_full: eta * full, bound_bar: bar, ratio: eta * full / bar })
        })
        .collect()
}
