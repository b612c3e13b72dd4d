//! The SQL precision bound: `4·min ‖α‖` over Lagrange data `(h, h⃗, 𝔥)`
//! satisfying `β = 0`, solved as an LMI in the stacked operator
//! `M = h⃗𝟙 + 𝔥L⃗` (so `α = M†M`).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, ensure_hermitian, hermitian_coordinates, hs_norm, identity, operator_norm, real_null_space,
    real_pseudoinverse, CMatrix, CVector, RMatrix, RVector, DEFAULT_RANK_TOL,
};
use crate::lmi::{self, LmiOptions, LmiProblem};
use crate::model::{hnls_check, quadratic_span, NoiseModel};

pub const DEFAULT_BOUND_TOL: f64 = 1e-8;
const FALLBACK_BOUND_TOL: f64 = 1e-6;

/// Real coordinates `w = [h, Re h⃗, Im h⃗, 𝔥]` of the Lagrange data for a
/// fixed operator list, with `𝔥` stored as its diagonal followed by
/// `(Re, Im)` of each upper-triangular entry.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    dim: usize,
    ops: Vec<CMatrix>,
    products: Vec<Vec<CMatrix>>,
}

impl Lagrangian {
    pub fn new(dim: usize, ops: Vec<CMatrix>) -> Self {
        let products = ops.iter().map(|li| ops.iter().map(|lj| li.adjoint() * lj).collect()).collect();
        Self { dim, ops, products }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn num_params(&self) -> usize {
        let r = self.ops.len();
        1 + 2 * r + r * r
    }

    pub fn unpack(&self, w: &RVector) -> (f64, CVector, CMatrix) {
        let r = self.ops.len();
        let hvec = CVector::from_fn(r, |i, _| c64(w[1 + i], w[1 + r + i]));
        let mut hfrak = CMatrix::zeros(r, r);
        let mut idx = 1 + 2 * r;
        for i in 0..r {
            hfrak[(i, i)] = c64(w[idx], 0.0);
            idx += 1;
        }
        for i in 0..r {
            for j in (i + 1)..r {
                hfrak[(i, j)] = c64(w[idx], w[idx + 1]);
                hfrak[(j, i)] = c64(w[idx], -w[idx + 1]);
                idx += 2;
            }
        }
        (w[0], hvec, hfrak)
    }

    pub fn pack(&self, h: f64, hvec: &CVector, hfrak: &CMatrix) -> RVector {
        let r = self.ops.len();
        let mut w = RVector::zeros(self.num_params());
        w[0] = h;
        for i in 0..r {
            w[1 + i] = hvec[i].re;
            w[1 + r + i] = hvec[i].im;
        }
        let mut idx = 1 + 2 * r;
        for i in 0..r {
            w[idx] = hfrak[(i, i)].re;
            idx += 1;
        }
        for i in 0..r {
            for j in (i + 1)..r {
                w[idx] = hfrak[(i, j)].re;
                w[idx + 1] = hfrak[(i, j)].im;
                idx += 2;
            }
        }
        w
    }

    /// `h𝟙 + h⃗†L⃗ + L⃗†h⃗ + L⃗†𝔥L⃗`.
    pub fn beta_increment(&self, w: &RVector) -> CMatrix {
        let (h, hvec, hfrak) = self.unpack(w);
        let mut b = identity(self.dim) * c64(h, 0.0);
        for (i, l) in self.ops.iter().enumerate() {
            if hvec[i] != C64::new(0.0, 0.0) {
                b += l * hvec[i].conj() + l.adjoint() * hvec[i];
            }
            for j in 0..self.ops.len() {
                if hfrak[(i, j)] != C64::new(0.0, 0.0) {
                    b += &self.products[i][j] * hfrak[(i, j)];
                }
            }
        }
        b
    }

    /// Row block `i` is `h⃗_i𝟙 + Σ_j 𝔥_ij L_j`; only the listed rows are kept.
    pub fn stacked(&self, w: &RVector, rows: &[usize]) -> CMatrix {
        let (_, hvec, hfrak) = self.unpack(w);
        let d = self.dim;
        let mut m = CMatrix::zeros(rows.len() * d, d);
        for (k, &i) in rows.iter().enumerate() {
            let mut block = identity(d) * hvec[i];
            for (j, l) in self.ops.iter().enumerate() {
                if hfrak[(i, j)] != C64::new(0.0, 0.0) {
                    block += l * hfrak[(i, j)];
                }
            }
            m.view_mut((k * d, 0), (d, d)).copy_from(&block);
        }
        m
    }

    /// Matrix of the linear map `w ↦ coords(β − H)`.
    pub fn constraint_matrix(&self) -> RMatrix {
        let n = self.num_params();
        let mut a = RMatrix::zeros(self.dim * self.dim, n);
        for k in 0..n {
            let mut e = RVector::zeros(n);
            e[k] = 1.0;
            a.set_column(k, &hermitian_coordinates(&self.beta_increment(&e)));
        }
        a
    }
}

/// `(α, β)` for the model's operators.
pub fn lagrangian_terms(model: &NoiseModel, h: f64, hvec: &CVector, hfrak: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let r = model.num_lindblads();
    if hvec.len() != r || hfrak.shape() != (r, r) {
        return Err(Error::Shape(format!("expected h⃗ of length {r} and 𝔥 of shape {r}x{r}")));
    }
    let hfrak = ensure_hermitian(hfrak).map_err(|e| Error::Validation(format!("𝔥 must be Hermitian: {e}")))?;
    let lag = Lagrangian::new(model.dim(), model.lindblads());
    let w = lag.pack(h, hvec, &hfrak);
    let rows: Vec<usize> = (0..r).collect();
    let m = lag.stacked(&w, &rows);
    let alpha = m.adjoint() * &m;
    let beta = model.hamiltonian() + lag.beta_increment(&w);
    Ok((alpha, beta))
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub h: f64,
    pub hvec: CVector,
    pub hfrak: CMatrix,
    /// `α⋄`, or `ᾱ⋄` for the biased program.
    pub alpha: CMatrix,
    /// `4‖α⋄‖`.
    pub value: f64,
    pub beta_residual: f64,
    /// Certified bound on `‖M‖ − min‖M‖` from the barrier solve.
    pub gap: f64,
    /// The default tolerance failed and the looser fallback was used.
    pub reduced_precision: bool,
    /// `M⋄` restricted to `rows`.
    pub stacked: CMatrix,
    pub rows: Vec<usize>,
    /// Operators used in the program (base operators for the biased one).
    pub lagrangian: Lagrangian,
    /// Twice the top-left block of the LMI dual; approximates an optimal
    /// code support `X`.
    pub dual_support: CMatrix,
}

fn hermitian_embed(m: &CMatrix) -> CMatrix {
    let (rows, d) = m.shape();
    let n = rows + d;
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((d, 0), (rows, d)).copy_from(m);
    out.view_mut((0, d), (d, rows)).copy_from(&m.adjoint());
    out
}

fn solve_program(h: &CMatrix, lag: Lagrangian, rows: Vec<usize>, tol: f64) -> Result<DualSolution> {
    let d = lag.dim();
    let a = lag.constraint_matrix();
    let target = -hermitian_coordinates(h);
    let w0 = real_pseudoinverse(&a, DEFAULT_RANK_TOL) * &target;
    let residual = (&a * &w0 - &target).norm();
    if residual > 1e-8 * hs_norm(h).max(1.0) {
        return Err(Error::HlAchievable { distance: residual });
    }
    let null = real_null_space(&a, DEFAULT_RANK_TOL);

    let n = (rows.len() + 1) * d;
    let mut coefficients = vec![identity(n)];
    for j in 0..null.ncols() {
        let dir = null.column(j).into_owned();
        coefficients.push(hermitian_embed(&lag.stacked(&dir, &rows)));
    }
    let constant = hermitian_embed(&lag.stacked(&w0, &rows));
    let mut objective = RVector::zeros(coefficients.len());
    objective[0] = 1.0;
    let mut x0 = RVector::zeros(coefficients.len());
    x0[0] = operator_norm(&constant)? + 1.0;
    let problem = LmiProblem { objective, constant, coefficients };

    let run = |gap_tol: f64| lmi::solve(&problem, &x0, &LmiOptions { gap_tol, ..LmiOptions::default() });
    let (sol, reduced_precision) = match run(tol) {
        Ok(s) => (s, false),
        Err(Error::Solver { .. }) if tol < FALLBACK_BOUND_TOL => (run(FALLBACK_BOUND_TOL)?, true),
        Err(e) => return Err(e),
    };

    let xi = sol.x.rows(1, null.ncols()).into_owned();
    let w = &w0 + &null * xi;
    let (hh, hvec, hfrak) = lag.unpack(&w);
    let stacked = lag.stacked(&w, &rows);
    let alpha = stacked.adjoint() * &stacked;
    let value = 4.0 * operator_norm(&alpha)?;
    let beta_residual = hs_norm(&(h + lag.beta_increment(&w)));
    let dual_support = sol.dual.view((0, 0), (d, d)) * c64(2.0, 0.0);
    Ok(DualSolution {
        h: hh,
        hvec,
        hfrak,
        alpha,
        value,
        beta_residual,
        gap: sol.gap,
        reduced_precision,
        stacked,
        rows,
        lagrangian: lag,
        dual_support,
    })
}

/// Minimizes `‖α‖` subject to `β = 0`.
pub fn solve_bound(model: &NoiseModel, tol: f64) -> Result<DualSolution> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let verdict = hnls_check(model, model.hnls_default_tol())?;
    if verdict.hl_achievable {
        return Err(Error::HlAchievable { distance: verdict.distance });
    }
    let lag = Lagrangian::new(model.dim(), model.lindblads());
    let rows = (0..model.num_lindblads()).collect();
    solve_program(model.hamiltonian(), lag, rows, tol)
}

/// Leading-order program for strong/weak noise: minimizes `‖ᾱ‖` with only
/// the weak rows of `M` (built from the unscaled operators). The returned
/// value is `4‖ᾱ⋄‖`; divide by η for the asymptotic QFI.
pub fn solve_bound_biased(model: &NoiseModel, tol: f64) -> Result<DualSolution> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let bias =
        model.bias().ok_or_else(|| Error::Validation("biased program requires a strong/weak partition".into()))?;
    let base = model.base_lindblads();
    let strong: Vec<CMatrix> = bias.strong.iter().map(|&i| base[i].clone()).collect();
    let strong_span = quadratic_span(model.dim(), &strong, DEFAULT_RANK_TOL)?;
    let distance = strong_span.distance(model.hamiltonian())?;
    if distance <= model.hnls_default_tol() {
        return Err(Error::StrongSpanViolation { distance });
    }
    let verdict = hnls_check(model, model.hnls_default_tol())?;
    if verdict.hl_achievable {
        return Err(Error::HlAchievable { distance: verdict.distance });
    }
    let lag = Lagrangian::new(model.dim(), base.to_vec());
    solve_program(model.hamiltonian(), lag, bias.weak.clone(), tol)
}

/// Leading-order QFI per unit time, `4‖ᾱ⋄‖/η`.
pub fn asymptotic_bound(dual: &DualSolution, eta: f64) -> f64 {
    dual.value / eta
}
