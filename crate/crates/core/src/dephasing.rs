//! N-qubit correlated dephasing: `H = Σ_k w_k Z_k` with noise modes
//! `L_j = √(μ_j/2) Σ_k (v_j)_k Z_k`, and the ancilla-free product code whose
//! optimum reaches `2wᵀΓ⁺w`, `Γ = Σ_j μ_j v_j v_jᵀ`.

use serde::{Deserialize, Serialize};

use crate::channel::{effective_from, EffectiveChannel};
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, kron, pauli_x, pauli_z, CMatrix, CVector, RMatrix, RVector};
use crate::model::NoiseModel;

pub const MIN_QUBITS: usize = 3;
pub const MAX_QUBITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub mu: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingSpec {
    pub n: usize,
    pub w: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Defaults to `1/‖u‖_∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    /// Code direction; defaults to the optimum `Γ⁺w/‖Γ⁺w‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

const UNIT_TOL: f64 = 1e-8;

impl DephasingSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < MIN_QUBITS {
            return Err(Error::Validation(format!("need at least {MIN_QUBITS} qubits, got {n}")));
        }
        if n > MAX_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds the supported maximum of {MAX_QUBITS}")));
        }
        let check_len = |v: &[f64], what: &str| {
            if v.len() != n {
                Err(Error::Validation(format!("{what} has length {}, expected {n}", v.len())))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(Error::Validation(format!("{what} has non-finite entries")))
            } else {
                Ok(())
            }
        };
        check_len(&self.w, "w")?;
        if (norm(&self.w) - 1.0).abs() > UNIT_TOL {
            return Err(Error::Validation("w must be a unit vector".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            check_len(&m.v, &format!("mode {i}"))?;
            if !(m.mu > 0.0 && m.mu.is_finite()) {
                return Err(Error::Validation(format!("mode {i} has non-positive rate {}", m.mu)));
            }
        }
        for (i, a) in self.modes.iter().enumerate() {
            for (k, b) in self.modes.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                if (dot(&a.v, &b.v) - expect).abs() > UNIT_TOL {
                    return Err(Error::Validation("mode vectors must be orthonormal".into()));
                }
            }
        }
        if let Some(u) = &self.u {
            check_len(u, "u")?;
            if (norm(u) - 1.0).abs() > UNIT_TOL {
                return Err(Error::Validation("u must be a unit vector".into()));
            }
        }
        if let Some(chi) = self.chi {
            if !(chi > 0.0 && chi.is_finite()) {
                return Err(Error::Parameter(format!("chi must be positive, got {chi}")));
            }
        }
        Ok(())
    }

    /// `Γ = Σ_j μ_j v_j v_jᵀ`.
    pub fn gamma_matrix(&self) -> RMatrix {
        let mut g = RMatrix::zeros(self.n, self.n);
        for m in &self.modes {
            let v = RVector::from_column_slice(&m.v);
            g += &v * v.transpose() * m.mu;
        }
        g
    }

    fn gamma_pinv(&self) -> RMatrix {
        crate::linalg::real_pseudoinverse(&self.gamma_matrix(), crate::linalg::DEFAULT_RANK_TOL)
    }

    /// `Γ⁺w/‖Γ⁺w‖`; errors if `w` is orthogonal to every mode.
    pub fn optimal_direction(&self) -> Result<RVector> {
        let u = self.gamma_pinv() * RVector::from_column_slice(&self.w);
        let nu = u.norm();
        if nu <= 1e-12 {
            return Err(Error::HlAchievable { distance: 1.0 });
        }
        Ok(u / nu)
    }

    pub fn direction(&self) -> Result<RVector> {
        match &self.u {
            Some(u) => Ok(RVector::from_column_slice(u)),
            None => self.optimal_direction(),
        }
    }

    /// `2wᵀΓ⁺w`.
    pub fn closed_form(&self) -> f64 {
        let w = RVector::from_column_slice(&self.w);
        2.0 * w.dot(&(self.gamma_pinv() * &w))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Σ_k a_k Z_k` on `n` qubits (qubit 0 is the most significant factor).
pub fn collective_z(a: &[f64]) -> CMatrix {
    let n = a.len();
    let dim = 1 << n;
    let mut m = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut v = 0.0;
        for (k, &ak) in a.iter().enumerate() {
            let bit = (s >> (n - 1 - k)) & 1;
            v += if bit == 0 { ak } else { -ak };
        }
        m[(s, s)] = c64(v, 0.0);
    }
    m
}

pub fn build_dephasing_model(spec: &DephasingSpec) -> Result<NoiseModel> {
    spec.validate()?;
    let ls = spec.modes.iter().map(|m| collective_z(&m.v) * c64((m.mu / 2.0).sqrt(), 0.0)).collect();
    NoiseModel::new(collective_z(&spec.w), ls)
}

#[derive(Debug, Clone)]
pub struct DephasingCode {
    pub logical_zero: CVector,
    pub logical_one: CVector,
    pub u: RVector,
    pub u_opt: RVector,
    pub chi: f64,
    pub theta: Vec<f64>,
}

impl DephasingCode {
    pub fn projector(&self) -> CMatrix {
        &self.logical_zero * self.logical_zero.adjoint() + &self.logical_one * self.logical_one.adjoint()
    }

    /// `|0_L⟩⟨0_L| − |1_L⟩⟨1_L|`.
    pub fn logical_z(&self) -> CMatrix {
        &self.logical_zero * self.logical_zero.adjoint() - &self.logical_one * self.logical_one.adjoint()
    }
}

/// `|0_L⟩ = ⊗_j (cos θ_j|0⟩ + i sin θ_j|1⟩)`, `|1_L⟩ = X^{⊗N}|0_L⟩`, with
/// `θ = ½ arccos(χu)` elementwise.
pub fn dephasing_code(spec: &DephasingSpec) -> Result<DephasingCode> {
    spec.validate()?;
    let u_opt = spec.optimal_direction()?;
    let u = spec.direction()?;
    let umax = u.amax();
    let chi_max = 1.0 / umax;
    let chi = spec.chi.unwrap_or(chi_max);
    if chi > chi_max * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("chi {chi} exceeds 1/‖u‖_∞ = {chi_max}")));
    }
    let theta: Vec<f64> = u.iter().map(|&uk| 0.5 * (chi * uk).clamp(-1.0, 1.0).acos()).collect();
    let n = spec.n;
    let zero = CVector::from_fn(1 << n, |s, _| {
        theta.iter().enumerate().fold(c64(1.0, 0.0), |acc, (k, &t)| {
            let bit = (s >> (n - 1 - k)) & 1;
            acc * if bit == 0 { c64(t.cos(), 0.0) } else { c64(0.0, t.sin()) }
        })
    });
    let mut flip = CMatrix::from_element(1, 1, c64(1.0, 0.0));
    for _ in 0..spec.n {
        flip = kron(&flip, &pauli_x());
    }
    let one = &flip * &zero;
    Ok(DephasingCode { logical_zero: zero, logical_one: one, u, u_opt, chi, theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DephasingReport {
    pub effective: EffectiveChannel,
    pub closed_form: f64,
}

/// Effective logical channel of the product code. The signal is
/// `⟨0_L|H|0_L⟩ − ⟨1_L|H|1_L⟩`, and each mode, compressed to the code
/// (`P L_j P = c_j Z_L`), dephases the logical coherence at `2|c_j|²`.
pub fn dephasing_effective(spec: &DephasingSpec) -> Result<DephasingReport> {
    let code = dephasing_code(spec)?;
    let model = build_dephasing_model(spec)?;
    let expect = |op: &CMatrix, v: &CVector| v.dotc(&(op * v));
    let h = model.hamiltonian();
    let signal = (expect(h, &code.logical_zero) - expect(h, &code.logical_one)).re;
    let mut gamma = 0.0;
    for l in model.lindblads() {
        let c0 = expect(&l, &code.logical_zero);
        let c1 = expect(&l, &code.logical_one);
        let c = (c0 - c1) * 0.5;
        gamma += 2.0 * c.norm_sqr();
    }
    let effective = effective_from(signal, gamma);
    let closed_form = spec.closed_form();
    Ok(DephasingReport { effective, closed_form })
}

/// Residual of `P A P ∝ P` on the code space.
pub fn sandwich_residual(code: &DephasingCode, a: &CMatrix) -> f64 {
    let p = code.projector();
    let s = &p * a * &p;
    let scale = crate::linalg::trace_product(&p, &s) / c64(2.0, 0.0);
    (s - p * scale).norm()
}

/// Reference instance: three qubits, `μ = (1, 0.1)`, collective and
/// antisymmetric modes, signal along the weaker mode.
pub fn reference_spec() -> DephasingSpec {
    let s3 = 1.0 / 3.0_f64.sqrt();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    DephasingSpec {
        n: 3,
        w: vec![s2, -s2, 0.0],
        modes: vec![Mode { mu: 1.0, v: vec![s3, s3, s3] }, Mode { mu: 0.1, v: vec![s2, -s2, 0.0] }],
        chi: None,
        u: None,
    }
}

/// `Z` on qubit `k` of `n`.
pub fn single_z(n: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::from_element(1, 1, c64(1.0, 0.0));
    for q in 0..n {
        m = kron(&m, &if q == k { pauli_z() } else { identity(2) });
    }
    m
}
