//! Strong/weak noise: the leading-order (in η) program, its gauge frame, and
//! the optimal `C̃` that fully corrects the strong operators.

use crate::bound::{solve_bound_biased, DualSolution};
use crate::code::{b_matrix_optimum, BTerm};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, ensure_hermitian, hermitian_eigen, hermitian_part, identity, psd_factor, pseudoinverse, trace, trace_product,
    CMatrix, HermitianSpan, DEFAULT_RANK_TOL,
};
use crate::model::NoiseModel;

#[derive(Debug, Clone)]
pub struct BiasedFrame {
    /// Transformed base operators, in the model's index order.
    pub j: Vec<CMatrix>,
    pub lambda: Vec<f64>,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    /// `𝒥_ij = Tr(X J_i†J_j)`.
    pub gram: CMatrix,
    pub null_strong: Vec<usize>,
    pub null_weak: Vec<usize>,
    pub c: CMatrix,
    pub x: CMatrix,
}

fn sub(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn gram_of(ops: &[CMatrix], x: &CMatrix) -> CMatrix {
    let r = ops.len();
    CMatrix::from_fn(r, r, |i, k| trace_product(x, &(ops[i].adjoint() * &ops[k])))
}

/// Eigen-rotation of one index block: returns the rotated operators and the
/// eigenvalues (non-ascending).
fn rotate_block(ops: &[CMatrix], block: &[usize], target: &CMatrix) -> Result<(Vec<CMatrix>, Vec<f64>)> {
    if block.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let eig = hermitian_eigen(&hermitian_part(target))?;
    let u = eig.vectors.transpose();
    let d = ops[0].nrows();
    let rotated = (0..block.len())
        .map(|a| {
            let mut acc = CMatrix::zeros(d, d);
            for (b, &k) in block.iter().enumerate() {
                acc += &ops[k] * u[(a, b)];
            }
            acc
        })
        .collect();
    Ok((rotated, eig.values.iter().map(|v| v.max(0.0)).collect()))
}

/// Centres the base operators on `X`, diagonalizes the strong Gram block,
/// then the Schur complement of the weak block.
pub fn biased_frame(model: &NoiseModel, x: &CMatrix) -> Result<BiasedFrame> {
    let bias = model.bias().ok_or_else(|| Error::Validation("biased frame requires a strong/weak partition".into()))?;
    let x = ensure_hermitian(x)?;
    let tr = trace(&x).re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!("code support must have unit trace, got {tr}")));
    }
    let d = model.dim();
    let centred: Vec<CMatrix> = model.base_lindblads().iter().map(|l| l - identity(d) * trace_product(l, &x)).collect();
    let (s, w) = (bias.strong.clone(), bias.weak.clone());
    let g0 = gram_of(&centred, &x);

    let (strong_ops, strong_lambda) = rotate_block(&centred, &s, &sub(&g0, &s, &s))?;
    let mut j = centred.clone();
    for (a, &i) in s.iter().enumerate() {
        j[i] = strong_ops[a].clone();
    }
    let g1 = gram_of(&j, &x);
    let jss_pinv = pseudoinverse(&sub(&g1, &s, &s), DEFAULT_RANK_TOL)?;
    let schur = sub(&g1, &w, &w) - sub(&g1, &w, &s) * jss_pinv * sub(&g1, &s, &w);
    let (weak_ops, weak_lambda) = rotate_block(&j, &w, &schur)?;
    for (a, &i) in w.iter().enumerate() {
        j[i] = weak_ops[a].clone();
    }

    let mut lambda = vec![0.0; j.len()];
    for (a, &i) in s.iter().enumerate() {
        lambda[i] = strong_lambda[a];
    }
    for (a, &i) in w.iter().enumerate() {
        lambda[i] = weak_lambda[a];
    }
    let scale = lambda.iter().copied().fold(1.0_f64, f64::max);
    let is_null = |i: &usize| lambda[*i] <= DEFAULT_RANK_TOL * scale;
    let null_strong = s.iter().copied().filter(is_null).collect();
    let null_weak = w.iter().copied().filter(is_null).collect();
    let gram = gram_of(&j, &x);
    let c = psd_factor(&x, DEFAULT_RANK_TOL)?;
    Ok(BiasedFrame { j, lambda, strong: s, weak: w, gram, null_strong, null_weak, c, x })
}

impl BiasedFrame {
    fn strong_pinv(&self, i: usize) -> f64 {
        if self.null_strong.contains(&i) {
            0.0
        } else {
            1.0 / self.lambda[i]
        }
    }

    /// `N_ii' = J_i†J_i' − Σ_{j∈𝔰, λ_j≠0} (𝒥_ij J_j†J_i' + 𝒥_ji' J_i†J_j)/λ_j`, so
    /// that `Tr(N_ii' C̃)` is the `(i, i')` entry of the weak-block operator in
    /// the 𝔉̄ denominator (before dividing by `Tr(HC̃)`).
    pub fn weak_pair_operator(&self, i: usize, k: usize) -> CMatrix {
        let mut n = self.j[i].adjoint() * &self.j[k];
        for &s in &self.strong {
            let p = self.strong_pinv(s);
            if p != 0.0 {
                n -= self.j[s].adjoint() * &self.j[k] * (self.gram[(i, s)] * p);
                n -= self.j[i].adjoint() * &self.j[s] * (self.gram[(s, k)] * p);
            }
        }
        n
    }

    fn constraint_span(&self) -> Result<HermitianSpan> {
        let d = self.x.nrows();
        let iu = c64(0.0, 1.0);
        let mut gens = vec![identity(d)];
        let mut push = |m: CMatrix| {
            gens.push(&m + m.adjoint());
            gens.push((&m - m.adjoint()) * iu);
        };
        for &i in &self.strong {
            push(self.j[i].clone());
            for &k in &self.strong {
                push(self.j[i].adjoint() * &self.j[k]);
            }
        }
        for &i in &self.null_strong {
            for &k in &self.weak {
                push(self.j[i].adjoint() * &self.j[k]);
            }
        }
        for &i in &self.null_weak {
            for &k in &self.null_weak {
                push(self.weak_pair_operator(i, k));
            }
        }
        HermitianSpan::from_generators(d, gens, DEFAULT_RANK_TOL)
    }

    fn denominator_terms(&self) -> Vec<BTerm> {
        let mut terms: Vec<BTerm> = self.weak.iter().map(|&i| BTerm { op: self.j[i].clone(), weight: 1.0 }).collect();
        let scale = self.lambda.iter().copied().fold(1.0_f64, f64::max);
        for &i in &self.weak {
            for &k in &self.weak {
                let s = self.lambda[i] + self.lambda[k];
                if s > DEFAULT_RANK_TOL * scale {
                    terms.push(BTerm { op: self.weak_pair_operator(i, k), weight: 1.0 / (2.0 * s) });
                }
            }
            for &s in &self.strong {
                let p = self.strong_pinv(s);
                if p != 0.0 {
                    terms.push(BTerm { op: self.j[i].adjoint() * &self.j[s], weight: p });
                }
            }
        }
        terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiBar {
    pub value: f64,
    pub constraints_ok: bool,
    /// Largest normalized constraint violation.
    pub violation: f64,
}

/// Leading-order normalized QFI (times η) of a code with the given `C̃`, and
/// whether `C̃` satisfies the strong-noise correction constraints.
pub fn qfi_bar(frame: &BiasedFrame, ctilde: &CMatrix, h: &CMatrix, tol: f64) -> Result<QfiBar> {
    let signal = trace_product(h, ctilde).re;
    if signal.abs() <= 1e-300 {
        return Err(Error::ZeroSignal);
    }
    let jv = |i: usize| trace_product(&frame.j[i], ctilde) / signal;
    let jf = |i: usize, k: usize| trace_product(&(frame.j[i].adjoint() * &frame.j[k]), ctilde) / signal;
    let kf = |i: usize, k: usize| trace_product(&frame.weak_pair_operator(i, k), ctilde) / signal;

    let mut den = 0.0;
    for &i in &frame.weak {
        den += jv(i).norm_sqr();
    }
    let scale = frame.lambda.iter().copied().fold(1.0_f64, f64::max);
    for &i in &frame.weak {
        for &k in &frame.weak {
            let s = frame.lambda[i] + frame.lambda[k];
            if s > DEFAULT_RANK_TOL * scale {
                den += kf(i, k).norm_sqr() / (2.0 * s);
            }
        }
        for &s in &frame.strong {
            let p = frame.strong_pinv(s);
            if p != 0.0 {
                den += jf(i, s).norm_sqr() * p;
            }
        }
    }

    let mut violation: f64 = 0.0;
    for &i in &frame.strong {
        violation = violation.max(jv(i).norm());
        for &k in &frame.strong {
            violation = violation.max(jf(i, k).norm());
        }
    }
    for &i in &frame.null_strong {
        for &k in &frame.weak {
            violation = violation.max(jf(i, k).norm());
        }
    }
    for &i in &frame.null_weak {
        for &k in &frame.null_weak {
            violation = violation.max(kf(i, k).norm());
        }
    }
    let value = if den <= 1e-300 { f64::INFINITY } else { 1.0 / den };
    Ok(QfiBar { value, constraints_ok: violation <= tol, violation })
}

/// `Π_𝔫𝔰 𝒥_𝔰𝔰̄`, which vanishes identically; returned for assertion.
pub fn null_strong_coupling(frame: &BiasedFrame) -> f64 {
    let mut worst: f64 = 0.0;
    for &i in &frame.null_strong {
        for &k in &frame.weak {
            worst = worst.max(frame.gram[(i, k)].norm());
        }
    }
    worst
}

/// Maximizes 𝔉̄ over `C̃` subject to the strong-noise constraints.
pub fn optimal_ctilde_biased(frame: &BiasedFrame, h: &CMatrix) -> Result<(CMatrix, f64)> {
    b_matrix_optimum(h, &frame.constraint_span()?, &frame.denominator_terms())
}

/// True iff `Tr(L_iC̃)` and `Tr(L_i†L_jC̃)` vanish (within `tol`) for all
/// listed operators: the Knill–Laflamme condition for the perturbation code.
pub fn kl_check(ctilde: &CMatrix, strong_ops: &[CMatrix], tol: f64) -> bool {
    kl_residual(ctilde, strong_ops) <= tol
}

pub fn kl_residual(ctilde: &CMatrix, strong_ops: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for li in strong_ops {
        worst = worst.max(trace_product(li, ctilde).norm());
        for lj in strong_ops {
            worst = worst.max(trace_product(&(li.adjoint() * lj), ctilde).norm());
        }
    }
    worst
}

/// Leading-order QFI per unit time `4‖ᾱ⋄‖/η`.
pub fn asymptotic_bound(model: &NoiseModel, tol: f64) -> Result<(f64, DualSolution)> {
    let eta =
        model.bias().ok_or_else(|| Error::Validation("asymptotic bound requires a strong/weak partition".into()))?.eta;
    let dual = solve_bound_biased(model, tol)?;
    Ok((dual.value / eta, dual))
}

/// Qubit with strong `Z` dephasing, weak `X` noise and signal `H = X`.
pub fn reference_model(eta: f64) -> Result<NoiseModel> {
    use crate::linalg::{pauli_x, pauli_z};
    NoiseModel::new(pauli_x(), vec![pauli_z(), pauli_x()])?.make_biased(&[0], &[1], eta)
}
