//! The sensing problem: a probe Hamiltonian `H` (multiplying the unknown
//! frequency ω) and Lindblad operators, optionally split into strong and weak
//! groups with the weak rates scaled by η.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    anticommutator, c64, commutator, ensure_hermitian, hs_norm, identity, kron, numerical_rank, vectorize, CMatrix,
    HermitianSpan, DEFAULT_RANK_TOL,
};
use num_complex::Complex64 as C64;

/// Strong/weak partition of the Lindblad operators. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    dim: usize,
    hamiltonian: CMatrix,
    /// Unscaled operators; weak ones are multiplied by √η on use.
    lindblads: Vec<CMatrix>,
    bias: Option<Bias>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HnlsVerdict {
    pub hl_achievable: bool,
    pub distance: f64,
    pub span_dim: usize,
}

/// Relative HNLS threshold, multiplied by `‖H‖_HS`.
pub const HNLS_REL_TOL: f64 = 1e-8;

impl NoiseModel {
    pub fn new(hamiltonian: CMatrix, lindblads: Vec<CMatrix>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim == 0 || !hamiltonian.is_square() {
            return Err(Error::Validation(format!(
                "Hamiltonian must be square and non-empty, got {:?}",
                hamiltonian.shape()
            )));
        }
        let hamiltonian = ensure_hermitian(&hamiltonian).map_err(|e| match e {
            Error::Symmetry { residual } => {
                Error::Validation(format!("Hamiltonian is not Hermitian (residual {residual:e})"))
            }
            other => Error::Validation(other.to_string()),
        })?;
        for (i, l) in lindblads.iter().enumerate() {
            if l.shape() != (dim, dim) {
                return Err(Error::Validation(format!(
                    "Lindblad operator {i} has shape {:?}, expected {dim}x{dim}",
                    l.shape()
                )));
            }
            if l.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation(format!("Lindblad operator {i} has non-finite entries")));
            }
        }
        let model = Self { dim, hamiltonian, lindblads, bias: None };
        model.check_independence()?;
        Ok(model)
    }

    fn check_independence(&self) -> Result<()> {
        let r = self.lindblads.len();
        let d2 = self.dim * self.dim;
        if r + 1 > d2 {
            return Err(Error::Validation(format!(
                "{r} Lindblad operators cannot be independent of the identity in dimension {}",
                self.dim
            )));
        }
        let mut stacked = CMatrix::zeros(d2, r + 1);
        stacked.set_column(0, &vectorize(&identity(self.dim)));
        for (i, l) in self.lindblads.iter().enumerate() {
            stacked.set_column(i + 1, &vectorize(l));
        }
        let rank = numerical_rank(&stacked, DEFAULT_RANK_TOL)?;
        if rank < r + 1 {
            return Err(Error::Validation(format!(
                "identity and Lindblad operators are linearly dependent (rank {rank} < {})",
                r + 1
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_lindblads(&self) -> usize {
        self.lindblads.len()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn bias(&self) -> Option<&Bias> {
        self.bias.as_ref()
    }

    /// Operators as they enter the master equation (weak ones scaled by √η).
    pub fn lindblads(&self) -> Vec<CMatrix> {
        match &self.bias {
            None => self.lindblads.clone(),
            Some(b) => {
                let s = C64::new(b.eta.sqrt(), 0.0);
                self.lindblads
                    .iter()
                    .enumerate()
                    .map(|(i, l)| if b.weak.contains(&i) { l * s } else { l.clone() })
                    .collect()
            }
        }
    }

    /// Operators before any η scaling.
    pub fn base_lindblads(&self) -> &[CMatrix] {
        &self.lindblads
    }

    /// Same model with a different Hamiltonian.
    pub fn with_hamiltonian(&self, hamiltonian: CMatrix) -> Result<Self> {
        let mut m = Self::new(hamiltonian, self.lindblads.clone())?;
        m.bias = self.bias.clone();
        Ok(m)
    }

    /// Attaches a strong/weak partition; weak rates become η times their
    /// base value.
    pub fn make_biased(&self, strong: &[usize], weak: &[usize], eta: f64) -> Result<Self> {
        let r = self.lindblads.len();
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Validation(format!("eta must lie in (0, 1], got {eta}")));
        }
        let mut seen = vec![false; r];
        for &i in strong.iter().chain(weak) {
            if i >= r {
                return Err(Error::Validation(format!("bias index {i} out of range for {r} operators")));
            }
            if seen[i] {
                return Err(Error::Validation(format!("bias index {i} appears more than once")));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("operator {i} is in neither the strong nor the weak set")));
        }
        let mut strong = strong.to_vec();
        let mut weak = weak.to_vec();
        strong.sort_unstable();
        weak.sort_unstable();
        Ok(Self { bias: Some(Bias { strong, weak, eta }), ..self.clone() })
    }

    pub fn without_bias(&self) -> Self {
        Self { bias: None, ..self.clone() }
    }

    pub fn hnls_default_tol(&self) -> f64 {
        HNLS_REL_TOL * hs_norm(&self.hamiltonian)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from_model(self)).expect("model documents always serialize")
    }
}

/// Real span of the Hermitian operators generated by `𝟙`, the operators,
/// their adjoints, and all pairwise products `A_i†A_j`.
pub fn quadratic_span(dim: usize, ops: &[CMatrix], rank_tol: f64) -> Result<HermitianSpan> {
    let i_unit = c64(0.0, 1.0);
    let mut gens = vec![identity(dim)];
    for l in ops {
        gens.push(l + l.adjoint());
        gens.push((l - l.adjoint()) * i_unit);
    }
    for (i, li) in ops.iter().enumerate() {
        for lj in &ops[i..] {
            let p = li.adjoint() * lj;
            gens.push(&p + p.adjoint());
            gens.push((&p - p.adjoint()) * i_unit);
        }
    }
    HermitianSpan::from_generators(dim, gens, rank_tol)
}

pub fn lindblad_span_basis(model: &NoiseModel) -> Result<HermitianSpan> {
    quadratic_span(model.dim(), &model.lindblads(), DEFAULT_RANK_TOL)
}

/// HL is achievable iff `H` sits farther than `tol` (HS norm) from the span.
pub fn hnls_check(model: &NoiseModel, tol: f64) -> Result<HnlsVerdict> {
    let span = lindblad_span_basis(model)?;
    let distance = span.distance(model.hamiltonian())?;
    Ok(HnlsVerdict { hl_achievable: distance > tol, distance, span_dim: span.len() })
}

/// `dρ/dt` for a state on the probe (dimension `d`) or on probe ⊗ ancilla
/// (any multiple of `d`, probe factor first).
pub fn apply_lindbladian(model: &NoiseModel, rho: &CMatrix, omega: f64) -> Result<CMatrix> {
    let d = model.dim();
    let n = rho.nrows();
    if !rho.is_square() || n == 0 || !n.is_multiple_of(d) {
        return Err(Error::Shape(format!("state of shape {:?} is incompatible with probe dimension {d}", rho.shape())));
    }
    let lift = |m: &CMatrix| if n == d { m.clone() } else { kron(m, &identity(n / d)) };
    let h = lift(model.hamiltonian());
    let mut out = commutator(&h, rho) * c64(0.0, -omega);
    for l in model.lindblads() {
        let l = lift(&l);
        let ld = l.adjoint();
        out += &l * rho * &ld - anticommutator(&(&ld * &l), rho) * c64(0.5, 0.0);
    }
    Ok(out)
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    dim: usize,
    hamiltonian: JsonMatrix,
    lindblads: Vec<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Bias>,
}

pub(crate) fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub(crate) fn matrix_from_json(rows: &JsonMatrix, dim: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse(format!("{what} is not {dim}x{dim}")));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("{what} has non-finite entries")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

impl ModelDocument {
    fn from_model(m: &NoiseModel) -> Self {
        Self {
            dim: m.dim,
            hamiltonian: matrix_to_json(&m.hamiltonian),
            lindblads: m.lindblads.iter().map(matrix_to_json).collect(),
            bias: m.bias.clone(),
        }
    }

    fn into_model(self) -> Result<NoiseModel> {
        let h = matrix_from_json(&self.hamiltonian, self.dim, "hamiltonian")?;
        let ls = self
            .lindblads
            .iter()
            .enumerate()
            .map(|(i, l)| matrix_from_json(l, self.dim, &format!("lindblad {i}")))
            .collect::<Result<Vec<_>>>()?;
        let model = NoiseModel::new(h, ls)?;
        match self.bias {
            None => Ok(model),
            Some(b) => model.make_biased(&b.strong, &b.weak, b.eta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_inner, pauli_x, pauli_y, pauli_z, trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, d: usize) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_state(rng: &mut impl Rng, d: usize) -> CMatrix {
        let g = random_matrix(rng, d);
        let rho = &g * g.adjoint();
        let t = trace(&rho);
        rho / t
    }

    fn dephasing(kappa: f64) -> NoiseModel {
        NoiseModel::new(pauli_z(), vec![pauli_z() * c64(kappa.sqrt(), 0.0)]).unwrap()
    }

    #[test]
    fn loads_dephasing_document() {
        let s = 0.5_f64.sqrt();
        let doc = format!(
            r#"{{"dim": 2, "hamiltonian": [[[1,0],[0,0]],[[0,0],[-1,0]]],
                "lindblads": [[[[{s},0],[0,0]],[[0,0],[-{s},0]]]]}}"#
        );
        let m = NoiseModel::from_json(&doc).unwrap();
        assert_eq!(m.num_lindblads(), 1);
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn identity_lindblad_is_rejected() {
        let err = NoiseModel::new(pauli_z(), vec![identity(2)]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let mut h = pauli_z();
        h[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(NoiseModel::new(h, vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_documents_are_parse_errors() {
        assert!(matches!(NoiseModel::from_json("{"), Err(Error::Parse(_))));
        assert!(matches!(
            NoiseModel::from_json(r#"{"dim":2,"hamiltonian":[[[1,0]]],"lindblads":[]}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = hermitian_part_of(&random_matrix(&mut rng, 3));
        let ls = vec![random_matrix(&mut rng, 3), random_matrix(&mut rng, 3)];
        let m = NoiseModel::new(h, ls).unwrap().make_biased(&[1], &[0], 0.3).unwrap();
        let back = NoiseModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.base_lindblads().iter().zip(back.base_lindblads()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    fn hermitian_part_of(m: &CMatrix) -> CMatrix {
        (m + m.adjoint()) * c64(0.5, 0.0)
    }

    #[test]
    fn dephasing_span_is_identity_and_z() {
        let span = lindblad_span_basis(&dephasing(0.7)).unwrap();
        assert_eq!(span.len(), 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for target in [identity(2) * c64(s, 0.0), pauli_z() * c64(s, 0.0)] {
            assert!(span.distance(&target).unwrap() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_span_is_everything() {
        let m = NoiseModel::new(pauli_x(), vec![pauli_x(), pauli_y(), pauli_z()]).unwrap();
        assert_eq!(lindblad_span_basis(&m).unwrap().len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = hermitian_part_of(&random_matrix(&mut rng, 2));
        let v = hnls_check(&m.with_hamiltonian(h).unwrap(), 1e-8).unwrap();
        assert!(!v.hl_achievable);
    }

    #[test]
    fn noiseless_span_is_identity() {
        let m = NoiseModel::new(pauli_z(), vec![]).unwrap();
        let span = lindblad_span_basis(&m).unwrap();
        assert_eq!(span.len(), 1);
        assert!((hs_inner(&span.basis()[0], &identity(2)).re - 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn span_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = NoiseModel::new(pauli_z(), vec![random_matrix(&mut rng, 3 - 1)]).unwrap();
        let b = lindblad_span_basis(&m).unwrap();
        for (i, x) in b.basis().iter().enumerate() {
            for (j, y) in b.basis().iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((hs_inner(x, y).re - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hnls_examples() {
        let m = NoiseModel::new(pauli_x(), vec![pauli_z()]).unwrap();
        let v = hnls_check(&m, m.hnls_default_tol()).unwrap();
        assert!(v.hl_achievable);
        assert!((v.distance - 2.0_f64.sqrt()).abs() < 1e-12);

        let m = dephasing(0.5);
        let v = hnls_check(&m, m.hnls_default_tol()).unwrap();
        assert!(!v.hl_achievable);
        assert!(v.distance < 1e-12);
    }

    #[test]
    fn maximally_mixed_state_is_fixed_by_self_adjoint_noise() {
        let m = NoiseModel::new(pauli_x(), vec![pauli_z(), pauli_y() * c64(0.3, 0.0)]).unwrap();
        let rho = identity(2) * c64(0.5, 0.0);
        assert!(hs_norm(&apply_lindbladian(&m, &rho, 0.7).unwrap()) < 1e-15);
    }

    #[test]
    fn dephasing_kills_coherence_at_rate_two_kappa() {
        let kappa = 0.35;
        let plus = CMatrix::from_element(2, 2, c64(0.5, 0.0));
        let out = apply_lindbladian(&dephasing(kappa), &plus, 0.0).unwrap();
        let mut expect = CMatrix::zeros(2, 2);
        expect[(0, 1)] = c64(-2.0 * kappa * 0.5, 0.0);
        expect[(1, 0)] = expect[(0, 1)];
        assert!(hs_norm(&(out - expect)) < 1e-15);
    }

    #[test]
    fn lindbladian_is_traceless_and_hermitian_with_ancilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = NoiseModel::new(
            hermitian_part_of(&random_matrix(&mut rng, 2)),
            vec![random_matrix(&mut rng, 2), random_matrix(&mut rng, 2)],
        )
        .unwrap();
        for n in [2, 8] {
            let rho = random_state(&mut rng, n);
            let out = apply_lindbladian(&m, &rho, 1.3).unwrap();
            assert!(trace(&out).norm() < 1e-12);
            assert!(hs_norm(&(&out - out.adjoint())) < 1e-12);
        }
        assert!(matches!(apply_lindbladian(&m, &identity(3), 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn biased_model_scales_weak_dissipators() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = NoiseModel::new(pauli_x(), vec![pauli_z(), random_matrix(&mut rng, 2)]).unwrap();
        let eta = 0.04;
        let biased = base.make_biased(&[0], &[1], eta).unwrap();
        let rho = random_state(&mut rng, 2);

        let strong_only = NoiseModel::new(pauli_x(), vec![pauli_z()]).unwrap();
        let weak_only = NoiseModel::new(CMatrix::zeros(2, 2), vec![base.base_lindblads()[1].clone()]).unwrap();
        let expect = apply_lindbladian(&strong_only, &rho, 0.4).unwrap()
            + apply_lindbladian(&weak_only, &rho, 0.0).unwrap() * c64(eta, 0.0);
        assert!(hs_norm(&(apply_lindbladian(&biased, &rho, 0.4).unwrap() - expect)) < 1e-14);

        let unit = base.make_biased(&[0], &[1], 1.0).unwrap();
        assert_eq!(unit.lindblads(), base.lindblads());
    }

    #[test]
    fn bad_partitions_are_rejected() {
        let base = NoiseModel::new(pauli_x(), vec![pauli_z(), pauli_y()]).unwrap();
        assert!(base.make_biased(&[0, 1], &[1], 0.1).is_err());
        assert!(base.make_biased(&[0], &[], 0.1).is_err());
        assert!(base.make_biased(&[0], &[1], 0.0).is_err());
        assert!(base.make_biased(&[0], &[2], 0.5).is_err());
    }
}
