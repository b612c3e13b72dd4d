//! Optimal perturbation code: recover the code support `X` from the bound's
//! optimizer, move to the gauge where the Lindblad operators are centred and
//! orthogonal on `X`, find the optimal `C̃` by a pseudoinverse, and assemble
//! the logical states.

use serde::Serialize;

use crate::bound::{DualSolution, Lagrangian};
use crate::error::{Error, Result};
use crate::linalg::{
    anti_hermitian_part, c64, devectorize, ensure_hermitian, hermitian_coordinates, hermitian_eigen,
    hermitian_from_coordinates, hermitian_part, hs_norm, identity, psd_factor, real_null_space, real_pseudoinverse,
    singular_values, trace, trace_product, vectorize, CMatrix, CVector, HermitianSpan, RMatrix, RVector,
    DEFAULT_RANK_TOL,
};
use crate::lmi::{self, LmiOptions, LmiProblem};
use crate::model::NoiseModel;

/// Relative width of the top eigenspace of `α⋄`.
pub const DEFAULT_EIG_TOL: f64 = 1e-7;
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Regularization used when the optimal `C` is singular.
pub const DEFAULT_DELTA: f64 = 1e-2;

/// A direction `(Δh, Δh⃗, Δ𝔥)` along which `β` does not change.
#[derive(Debug, Clone)]
pub struct Direction {
    pub dh: f64,
    pub dhvec: CVector,
    pub dhfrak: CMatrix,
    coords: RVector,
}

/// Null-space directions of the `β` constraint for a given Lagrangian.
pub fn directions_for(lag: &Lagrangian) -> Vec<Direction> {
    let null = real_null_space(&lag.constraint_matrix(), DEFAULT_RANK_TOL);
    (0..null.ncols())
        .map(|k| {
            let coords = null.column(k).into_owned();
            let (dh, dhvec, dhfrak) = lag.unpack(&coords);
            Direction { dh, dhvec, dhfrak, coords }
        })
        .collect()
}

/// Basis of the Lagrange-data directions that leave `β` unchanged.
pub fn feasible_directions(model: &NoiseModel) -> Vec<Direction> {
    directions_for(&Lagrangian::new(model.dim(), model.lindblads()))
}

/// Projector basis (columns) onto the eigenspace of `α` within
/// `eig_tol·λ_max` of its top eigenvalue.
pub fn top_eigenspace(alpha: &CMatrix, eig_tol: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(alpha)?;
    let top = eig.max_value();
    let cut = top - eig_tol * top.abs().max(f64::MIN_POSITIVE);
    let k = eig.values.iter().take_while(|&&v| v >= cut).count().max(1);
    Ok(eig.vectors.columns(0, k).into_owned())
}

#[derive(Debug, Clone)]
pub struct CodeSupport {
    pub x: CMatrix,
    pub c: CMatrix,
    /// Largest violation of the stationarity constraints.
    pub residual: f64,
    /// Rank of the top eigenspace of `α⋄`.
    pub support_rank: usize,
}

/// Loosest eigenspace cutoff tried by `solve_code_support`.
pub const MAX_EIG_TOL: f64 = 1e-4;

/// Finds `X ⪰ 0` with `Tr X = 1`, support in the top eigenspace of `α⋄`, and
/// `Re Tr(X ΔM† M⋄) = 0` for every direction.
///
/// A degenerate top eigenvalue of the computed `α⋄` is split at roughly the
/// solver's relative gap, so on an infeasible system the eigenspace cutoff is
/// widened by decades from `DEFAULT_EIG_TOL` up to `MAX_EIG_TOL`.
pub fn solve_code_support(dual: &DualSolution, dirs: &[Direction], tol: f64) -> Result<CodeSupport> {
    let mut eig_tol = DEFAULT_EIG_TOL;
    loop {
        match solve_code_support_with(dual, dirs, tol, eig_tol) {
            Err(Error::Infeasible { .. }) if eig_tol * 10.0 <= MAX_EIG_TOL * (1.0 + 1e-9) => eig_tol *= 10.0,
            other => return other,
        }
    }
}

pub fn solve_code_support_with(dual: &DualSolution, dirs: &[Direction], tol: f64, eig_tol: f64) -> Result<CodeSupport> {
    let v = top_eigenspace(&dual.alpha, eig_tol)?;
    let k = v.ncols();
    let n = k * k;

    // Rows: trace condition, then one row per direction (unit-normalized).
    let mut rows: Vec<RVector> = vec![hermitian_coordinates(&identity(k))];
    let mut rhs = vec![1.0];
    for dir in dirs {
        let dm = dual.lagrangian.stacked(&dir.coords, &dual.rows);
        let full = dm.adjoint() * &dual.stacked;
        let norm = hs_norm(&full);
        if norm > 1e-14 {
            let g = v.adjoint() * full * &v;
            rows.push(hermitian_coordinates(&hermitian_part(&g)) / norm);
            rhs.push(0.0);
        }
    }
    let a = RMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = RVector::from_vec(rhs);

    let reference = hermitian_coordinates(&(identity(k) / c64(k as f64, 0.0)));
    let pinv = real_pseudoinverse(&a, 1e-10);
    let y = &reference + &pinv * (&b - &a * &reference);
    let residual = (&a * &y - &b).amax();
    if residual > tol.max(1e-10) * 1e3 {
        return Err(Error::Infeasible { residual, min_eigenvalue: f64::NAN });
    }
    let mut ymat = hermitian_from_coordinates(&y, k);
    let min_eig = hermitian_eigen(&ymat)?.min_value();
    if min_eig < -1e-10 {
        ymat = psd_fallback(&a, &y, k)?;
    }
    // Clamp rounding-level negatives and renormalize.
    let ymat = hermitian_eigen(&ymat)?.reconstruct_with(|l| l.max(0.0));
    let ymat = &ymat / trace(&ymat);
    let x = hermitian_part(&(&v * ymat * v.adjoint()));
    let residual = constraint_residual(dual, dirs, &x);
    let c = psd_factor(&x, DEFAULT_RANK_TOL)?;
    Ok(CodeSupport { x, c, residual, support_rank: k })
}

/// Largest `|Re Tr(X ΔM† M⋄)|` over unit-normalized directions.
pub fn constraint_residual(dual: &DualSolution, dirs: &[Direction], x: &CMatrix) -> f64 {
    dirs.iter()
        .map(|dir| {
            let dm = dual.lagrangian.stacked(&dir.coords, &dual.rows);
            let g = dm.adjoint() * &dual.stacked;
            trace_product(x, &g).re.abs() / hs_norm(&g).max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// Maximizes the smallest eigenvalue of `Y` over the affine solution set.
fn psd_fallback(a: &RMatrix, particular: &RVector, k: usize) -> Result<CMatrix> {
    let null = real_null_space(a, 1e-10);
    let base = hermitian_from_coordinates(particular, k);
    let mut coefficients = vec![-identity(k)];
    for j in 0..null.ncols() {
        coefficients.push(hermitian_from_coordinates(&null.column(j).into_owned(), k));
    }
    let mut objective = RVector::zeros(coefficients.len());
    objective[0] = -1.0;
    let mut x0 = RVector::zeros(coefficients.len());
    x0[0] = hermitian_eigen(&base)?.min_value() - 1.0;
    let problem = LmiProblem { objective, constant: base.clone(), coefficients };
    let sol = lmi::solve(&problem, &x0, &LmiOptions { gap_tol: 1e-11, ..LmiOptions::default() })?;
    let tau = sol.x[0];
    let mut y = base;
    for j in 0..null.ncols() {
        y += hermitian_from_coordinates(&null.column(j).into_owned(), k) * c64(sol.x[j + 1], 0.0);
    }
    if tau < -1e-9 {
        return Err(Error::Infeasible { residual: 0.0, min_eigenvalue: tau });
    }
    Ok(y)
}

/// Lindblad operators re-expressed so that `Tr(J_i X) = 0` and
/// `Tr(J_i†J_j X) = λ_i δ_ij`, with λ non-ascending.
#[derive(Debug, Clone)]
pub struct GaugeFrame {
    pub j: Vec<CMatrix>,
    pub lambda: Vec<f64>,
    pub nullset: Vec<usize>,
    pub c: CMatrix,
    pub x: CMatrix,
    /// `J_i = Σ_k u_ik (L_k − Tr(L_k X)𝟙)`.
    pub u: CMatrix,
}

impl GaugeFrame {
    pub fn gram(&self) -> CMatrix {
        let r = self.j.len();
        CMatrix::from_fn(r, r, |i, k| trace_product(&self.x, &(self.j[i].adjoint() * &self.j[k])))
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.nullset.contains(&i)
    }
}

pub fn gauge_transform(model: &NoiseModel, x: &CMatrix) -> Result<GaugeFrame> {
    gauge_transform_ops(&model.lindblads(), x)
}

pub fn gauge_transform_ops(ops: &[CMatrix], x: &CMatrix) -> Result<GaugeFrame> {
    let x = ensure_hermitian(x)?;
    let tr = trace(&x).re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!("code support must have unit trace, got {tr}")));
    }
    let c = psd_factor(&x, DEFAULT_RANK_TOL)?;
    let d = x.nrows();
    let centred: Vec<CMatrix> = ops.iter().map(|l| l - identity(d) * trace_product(l, &x)).collect();
    let r = ops.len();
    let gram = CMatrix::from_fn(r, r, |i, k| trace_product(&x, &(centred[i].adjoint() * &centred[k])));
    let (lambda, u) = if r == 0 {
        (Vec::new(), CMatrix::zeros(0, 0))
    } else {
        let eig = hermitian_eigen(&hermitian_part(&gram))?;
        (eig.values.clone(), eig.vectors.transpose())
    };
    let j: Vec<CMatrix> = (0..r)
        .map(|i| {
            let mut acc = CMatrix::zeros(d, d);
            for (k, l) in centred.iter().enumerate() {
                acc += l * u[(i, k)];
            }
            acc
        })
        .collect();
    let lambda: Vec<f64> = lambda.into_iter().map(|l| l.max(0.0)).collect();
    let scale = lambda.first().copied().unwrap_or(0.0).max(1.0);
    let nullset = (0..r).filter(|&i| lambda[i] <= DEFAULT_RANK_TOL * scale).collect();
    Ok(GaugeFrame { j, lambda, nullset, c, x, u })
}

/// One weighted term `w(|K^h⟩⟩⟨⟨K^h| + |K^ah⟩⟩⟨⟨K^ah|)` of the quadratic form.
pub(crate) struct BTerm {
    pub op: CMatrix,
    pub weight: f64,
}

/// Maximizes `Tr(HC̃)²/⟨⟨C̃|B|C̃⟩⟩` over Hermitian `C̃` orthogonal to the
/// constraint span; returns `(C̃, maximum)`.
pub(crate) fn b_matrix_optimum(h: &CMatrix, span: &HermitianSpan, terms: &[BTerm]) -> Result<(CMatrix, f64)> {
    let d = h.nrows();
    let (_, hh) = span.project(h)?;
    if hs_norm(&hh) <= 1e-10 * hs_norm(h).max(1e-300) {
        return Err(Error::ZeroSignal);
    }
    let mut b = CMatrix::zeros(d * d, d * d);
    for t in terms {
        if t.weight == 0.0 {
            continue;
        }
        for part in [hermitian_part(&t.op), anti_hermitian_part(&t.op)] {
            let (_, p) = span.project(&part)?;
            let v = vectorize(&p);
            b += &v * v.adjoint() * c64(t.weight, 0.0);
        }
    }
    let b = hermitian_part(&b);
    let eig = hermitian_eigen(&b)?;
    let top = eig.max_value().max(0.0);
    let hv = vectorize(&hh);
    let mut sol = CVector::zeros(d * d);
    let mut outside = 0.0;
    for (k, &lam) in eig.values.iter().enumerate() {
        let vk = eig.vectors.column(k);
        let coef = vk.dotc(&hv);
        if lam > DEFAULT_RANK_TOL * top && lam > 0.0 {
            sol += vk * (coef / lam);
        } else {
            outside += coef.norm_sqr();
        }
    }
    if outside.sqrt() > 1e-6 * hv.norm() {
        return Err(Error::HlAchievable { distance: outside.sqrt() });
    }
    let ct = hermitian_part(&devectorize(&sol, d)?);
    let qfi = hv.dotc(&sol).re;
    Ok((ct, qfi))
}

/// `𝒮₀ = span{𝟙, J_i†J_j : i, j ∈ 𝔫}`.
pub fn null_span(frame: &GaugeFrame) -> Result<HermitianSpan> {
    let d = frame.x.nrows();
    let iu = c64(0.0, 1.0);
    let mut gens = vec![identity(d)];
    for (a, &i) in frame.nullset.iter().enumerate() {
        for &k in &frame.nullset[a..] {
            let p = frame.j[i].adjoint() * &frame.j[k];
            gens.push(&p + p.adjoint());
            gens.push((&p - p.adjoint()) * iu);
        }
    }
    HermitianSpan::from_generators(d, gens, DEFAULT_RANK_TOL)
}

/// Optimal `C̃` and the resulting normalized QFI.
pub fn optimal_ctilde(frame: &GaugeFrame, h: &CMatrix) -> Result<(CMatrix, f64)> {
    let span = null_span(frame)?;
    let r = frame.j.len();
    let mut terms: Vec<BTerm> = frame.j.iter().map(|j| BTerm { op: j.clone(), weight: 1.0 }).collect();
    for i in 0..r {
        for k in 0..r {
            let s = frame.lambda[i] + frame.lambda[k];
            if s > 0.0 && !(frame.is_null(i) && frame.is_null(k)) {
                terms.push(BTerm { op: frame.j[i].adjoint() * &frame.j[k], weight: 1.0 / (2.0 * s) });
            }
        }
    }
    b_matrix_optimum(h, &span, &terms)
}

/// Logical code `|c_L⟩ = Σ_ij (A_c)_ij |i⟩_S |j⟩_A' |c⟩` with
/// `A_{0/1} ∝ C ± εD`.
#[derive(Debug, Clone)]
pub struct PerturbationCode {
    pub c: CMatrix,
    pub d: CMatrix,
    /// Unit-HS-norm `C̃ = CD† + DC†`.
    pub ctilde: CMatrix,
    pub epsilon: f64,
    pub delta: f64,
    pub a0: CMatrix,
    pub a1: CMatrix,
    pub logical_zero: CVector,
    pub logical_one: CVector,
}

impl PerturbationCode {
    pub fn probe_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn projector(&self) -> CMatrix {
        &self.logical_zero * self.logical_zero.adjoint() + &self.logical_one * self.logical_one.adjoint()
    }

    /// `1 + ε² Tr(DD†)`, the squared norm of `C ± εD`.
    pub fn normalizer_sq(&self) -> f64 {
        1.0 + self.epsilon * self.epsilon * hs_norm(&self.d).powi(2)
    }
}

/// Index of `|i⟩_S|j⟩_A'|b⟩` in the `2d²`-dimensional code space.
pub fn code_index(d: usize, i: usize, j: usize, b: usize) -> usize {
    (i * d + j) * 2 + b
}

pub fn logical_state(a: &CMatrix, tag: usize) -> CVector {
    let d = a.nrows();
    let mut v = CVector::zeros(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            v[code_index(d, i, j, tag)] = a[(i, j)];
        }
    }
    v
}

/// True when the smallest singular value is at or below `rank_tol`.
pub fn is_singular(c: &CMatrix, rank_tol: f64) -> Result<bool> {
    Ok(singular_values(c)?.last().copied().unwrap_or(0.0) <= rank_tol)
}

pub fn assemble_code(c: &CMatrix, ctilde: &CMatrix, epsilon: f64, delta: f64) -> Result<PerturbationCode> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be non-negative, got {delta}")));
    }
    let d = c.nrows();
    if !c.is_square() || ctilde.shape() != (d, d) {
        return Err(Error::Shape("C and C̃ must be square of equal size".into()));
    }
    if is_singular(c, DEFAULT_RANK_TOL)? {
        if delta == 0.0 {
            return Err(Error::Parameter("C is singular; a positive delta is required".into()));
        }
        if epsilon > delta * delta / 10.0 {
            return Err(Error::Parameter(format!(
                "C is singular; epsilon {epsilon} must not exceed delta²/10 = {}",
                delta * delta / 10.0
            )));
        }
    }
    let ct = ensure_hermitian(ctilde)?;
    let nrm = hs_norm(&ct);
    if nrm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let ct = ct / c64(nrm, 0.0);
    let c = if delta > 0.0 {
        let shifted = c + identity(d) * c64(delta, 0.0);
        let n = hs_norm(&shifted);
        shifted / c64(n, 0.0)
    } else {
        c / c64(hs_norm(c), 0.0)
    };
    let c_inv = c.clone().try_inverse().ok_or_else(|| Error::Numeric("regularized C is not invertible".into()))?;
    let d_adj = &c_inv * &ct * c64(0.5, 0.0);
    let dm = d_adj.adjoint();
    let plus = &c + &dm * c64(epsilon, 0.0);
    let minus = &c - &dm * c64(epsilon, 0.0);
    let a0 = &plus / c64(hs_norm(&plus), 0.0);
    let a1 = &minus / c64(hs_norm(&minus), 0.0);
    Ok(PerturbationCode {
        logical_zero: logical_state(&a0, 0),
        logical_one: logical_state(&a1, 1),
        c,
        d: dm,
        ctilde: ct,
        epsilon,
        delta,
        a0,
        a1,
    })
}

/// Serializable view of a code (flat complex vectors as `[re, im]` pairs).
#[derive(Debug, Clone, Serialize)]
pub struct CodeDocument {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<[f64; 2]>>,
    pub ctilde: Vec<Vec<[f64; 2]>>,
    pub logical_zero: Vec<[f64; 2]>,
    pub logical_one: Vec<[f64; 2]>,
}

impl From<&PerturbationCode> for CodeDocument {
    fn from(code: &PerturbationCode) -> Self {
        let flat = |v: &CVector| v.iter().map(|z| [z.re, z.im]).collect();
        Self {
            epsilon: code.epsilon,
            delta: code.delta,
            c: crate::model::matrix_to_json(&code.c),
            d: crate::model::matrix_to_json(&code.d),
            ctilde: crate::model::matrix_to_json(&code.ctilde),
            logical_zero: flat(&code.logical_zero),
            logical_one: flat(&code.logical_one),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{lagrangian_terms, solve_bound, DEFAULT_BOUND_TOL};
    use crate::linalg::{kron, pauli_x, pauli_z};
    use crate::model::lindblad_span_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dephasing(kappa: f64) -> NoiseModel {
        NoiseModel::new(pauli_z(), vec![pauli_z() * c64(kappa.sqrt(), 0.0)]).unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, d: usize) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_psd(rng: &mut impl Rng, d: usize) -> CMatrix {
        let g = random_matrix(rng, d);
        let x = &g * g.adjoint();
        let t = trace(&x);
        x / t
    }

    #[test]
    fn dephasing_directions() {
        let kappa = 0.3;
        let model = dephasing(kappa);
        let dirs = feasible_directions(&model);
        assert_eq!(dirs.len(), 2);
        for dir in &dirs {
            assert!(dir.dhvec[0].re.abs() < 1e-12);
            assert!((dir.dh + kappa * dir.dhfrak[(0, 0)].re).abs() < 1e-12);
        }
    }

    #[test]
    fn directions_leave_beta_unchanged() {
        let mut lower = CMatrix::zeros(2, 2);
        lower[(0, 1)] = c64(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [
            NoiseModel::new(pauli_x(), vec![lower]).unwrap(),
            NoiseModel::new(pauli_x(), vec![random_matrix(&mut rng, 3 - 1), pauli_z()]).unwrap(),
        ] {
            for dir in feasible_directions(&model) {
                let (_, beta) = lagrangian_terms(&model, dir.dh, &dir.dhvec, &dir.dhfrak).unwrap();
                assert!(hs_norm(&(beta - model.hamiltonian())) < 1e-10);
            }
        }
    }

    #[test]
    fn dephasing_support_is_maximally_mixed() {
        let model = dephasing(0.5);
        let dual = solve_bound(&model, DEFAULT_BOUND_TOL).unwrap();
        let sup = solve_code_support(&dual, &feasible_directions(&model), 1e-8).unwrap();
        assert_eq!(sup.support_rank, 2);
        assert!(hs_norm(&(&sup.x - identity(2) * c64(0.5, 0.0))) < 1e-6);
        assert!(hs_norm(&(&sup.c - identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0))) < 1e-6);
    }

    #[test]
    fn nondegenerate_top_eigenvector_fixes_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_matrix(&mut rng, 3);
        let alpha = &g * g.adjoint();
        let v = top_eigenspace(&alpha, DEFAULT_EIG_TOL).unwrap();
        assert_eq!(v.ncols(), 1);
        let lag = Lagrangian::new(3, vec![]);
        let dual = DualSolution {
            h: 0.0,
            hvec: CVector::zeros(0),
            hfrak: CMatrix::zeros(0, 0),
            alpha: alpha.clone(),
            value: 0.0,
            beta_residual: 0.0,
            gap: 0.0,
            reduced_precision: false,
            stacked: CMatrix::zeros(0, 3),
            rows: vec![],
            lagrangian: lag,
            dual_support: CMatrix::zeros(3, 3),
        };
        let sup = solve_code_support(&dual, &[], 1e-8).unwrap();
        let expect = &v * v.adjoint();
        assert!(hs_norm(&(sup.x - expect)) < 1e-10);
    }

    #[test]
    fn gauge_conditions_hold_for_random_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ops: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 3)).collect();
        let x = random_psd(&mut rng, 3);
        let frame = gauge_transform_ops(&ops, &x).unwrap();
        for j in &frame.j {
            assert!(trace_product(j, &x).norm() < 1e-12);
        }
        let g = frame.gram();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { frame.lambda[i] } else { 0.0 };
                assert!((g[(i, k)] - c64(expect, 0.0)).norm() < 1e-10);
            }
        }
        assert!(frame.lambda.windows(2).all(|w| w[0] >= w[1]));
        let uu = &frame.u * frame.u.adjoint();
        assert!(hs_norm(&(uu - identity(3))) < 1e-12);
    }

    #[test]
    fn gauge_of_dephasing() {
        let kappa: f64 = 0.4;
        let x = identity(2) * c64(0.5, 0.0);
        for shift in [0.0, 0.7] {
            let l = pauli_z() * c64(kappa.sqrt(), 0.0) + identity(2) * c64(shift, 0.0);
            let frame = gauge_transform_ops(&[l], &x).unwrap();
            assert!((frame.lambda[0] - kappa).abs() < 1e-14);
            assert!(frame.nullset.is_empty());
            let ratio = frame.j[0][(0, 0)] / c64(kappa.sqrt(), 0.0);
            assert!((ratio.norm() - 1.0).abs() < 1e-14);
            assert!(hs_norm(&(&frame.j[0] - pauli_z() * frame.j[0][(0, 0)])) < 1e-14);
        }
    }

    #[test]
    fn dephasing_ctilde() {
        let kappa = 0.5;
        let frame = gauge_transform(&dephasing(kappa), &(identity(2) * c64(0.5, 0.0))).unwrap();
        let (ct, qfi) = optimal_ctilde(&frame, &pauli_z()).unwrap();
        assert!(hs_norm(&(ct - pauli_z() * c64(1.0 / (2.0 * kappa), 0.0))) < 1e-12);
        assert!((qfi - 1.0 / kappa).abs() < 1e-12);
    }

    #[test]
    fn signal_inside_constraint_span_is_zero_signal() {
        let frame = gauge_transform(&dephasing(0.5), &(identity(2) * c64(0.5, 0.0))).unwrap();
        assert!(matches!(optimal_ctilde(&frame, &identity(2)), Err(Error::ZeroSignal)));
    }

    #[test]
    fn ctilde_maximizes_rayleigh_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let model = NoiseModel::new(pauli_x(), vec![pauli_z(), random_matrix(&mut rng, 2) * c64(0.4, 0.0)]).unwrap();
        let x = random_psd(&mut rng, 2);
        let frame = gauge_transform(&model, &x).unwrap();
        let h = model.hamiltonian();
        let (ct, qfi) = optimal_ctilde(&frame, h).unwrap();
        let quotient = |c: &CMatrix| {
            let num = trace_product(h, c).re.powi(2);
            let mut den = 0.0;
            for j in &frame.j {
                den += trace_product(j, c).norm_sqr();
            }
            for i in 0..frame.j.len() {
                for k in 0..frame.j.len() {
                    let s = frame.lambda[i] + frame.lambda[k];
                    if s > 0.0 {
                        den += trace_product(&(frame.j[i].adjoint() * &frame.j[k]), c).norm_sqr() / (2.0 * s);
                    }
                }
            }
            num / den
        };
        assert!((quotient(&ct) - qfi).abs() < 1e-8 * qfi);
        assert!(trace(&ct).norm() < 1e-12);
        let span = null_span(&frame).unwrap();
        for _ in 0..10_000 {
            let g = random_matrix(&mut rng, 2);
            let (_, c) = span.project(&(&g + g.adjoint())).unwrap();
            assert!(quotient(&c) <= qfi * (1.0 + 1e-6));
        }
    }

    #[test]
    fn dephasing_code_structure() {
        let c = identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let eps = 1e-2;
        let code = assemble_code(&c, &pauli_z(), eps, 0.0).unwrap();
        assert!(code.logical_zero.dotc(&code.logical_one).norm() < 1e-15);
        assert!((hs_norm(&code.a0) - 1.0).abs() < 1e-14);
        assert!((hs_norm(&code.a1) - 1.0).abs() < 1e-14);
        assert!(trace_product(&code.c.adjoint(), &code.d).norm() < 1e-15);
        // D ∝ Z.
        let ratio = code.d[(0, 0)];
        assert!(hs_norm(&(&code.d - pauli_z() * ratio)) < 1e-15);
        // A₀A₀† − A₁A₁† = 2ε C̃ / N².
        let lhs = &code.a0 * code.a0.adjoint() - &code.a1 * code.a1.adjoint();
        let rhs = &code.ctilde * c64(2.0 * eps / code.normalizer_sq(), 0.0);
        assert!(hs_norm(&(lhs - rhs)) < 1e-12);
        // Off-diagonal logical blocks vanish for every operator on S ⊗ A'.
        let model = dephasing(0.5);
        let span = lindblad_span_basis(&model).unwrap();
        for s in span.basis().iter().chain(std::iter::once(model.hamiltonian())) {
            let big = kron(&kron(s, &identity(2)), &identity(2));
            assert!((code.logical_zero.adjoint() * big * &code.logical_one)[(0, 0)].norm() < 1e-15);
        }
        let p = code.projector();
        assert!(hs_norm(&(&p * &p - &p)) < 1e-14);
    }

    #[test]
    fn small_epsilon_collapses_logical_states() {
        let c = identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let code = assemble_code(&c, &pauli_z(), 1e-12, 0.0).unwrap();
        let d = 2;
        for i in 0..d {
            for j in 0..d {
                let z = code.logical_zero[code_index(d, i, j, 0)];
                let o = code.logical_one[code_index(d, i, j, 1)];
                assert!((z - o).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn singular_c_needs_regularization() {
        let mut c = CMatrix::zeros(2, 2);
        c[(0, 0)] = c64(1.0, 0.0);
        let ct = pauli_x();
        assert!(matches!(assemble_code(&c, &ct, 1e-3, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(assemble_code(&c, &ct, 1e-3, 1e-2), Err(Error::Parameter(_))));
        let code = assemble_code(&c, &ct, 1e-5, 1e-2).unwrap();
        assert!((hs_norm(&code.a0) - 1.0).abs() < 1e-14);
        assert!(code.logical_zero.dotc(&code.logical_one).norm() == 0.0);
    }
}
