//! Log-barrier path-following solver for small dense linear matrix
//! inequalities over complex Hermitian matrices:
//!
//! ```text
//! minimize    cᵀx
//! subject to  F(x) = F₀ + Σ_k x_k F_k ⪰ 0
//! ```
//!
//! The barrier `−log det F(x)` is self-concordant with parameter `n` (the
//! block size), so a point centred at barrier weight `t` is within `n/t` of
//! optimal, and `F(x)⁻¹/t` is the matching dual certificate.
//!
//! Directions that move no coefficient matrix and leave the objective flat
//! are removed up front; a flat direction that changes the objective makes
//! the problem unbounded and is reported as a solver error.

use nalgebra::Cholesky;
use nalgebra::Dyn;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{hs_inner, CMatrix, RMatrix, RVector};

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub objective: RVector,
    pub constant: CMatrix,
    pub coefficients: Vec<CMatrix>,
}

#[derive(Debug, Clone, Copy)]
pub struct LmiOptions {
    /// Target bound on `cᵀx − optimum`.
    pub gap_tol: f64,
    /// Barrier weight multiplier between centring phases.
    pub growth: f64,
    pub max_newton: usize,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-9, growth: 8.0, max_newton: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub x: RVector,
    pub value: f64,
    /// Certified suboptimality bound `n/t`.
    pub gap: f64,
    /// `F(x)⁻¹/t`; PSD, and `Tr(Z F_k) ≈ c_k` at a centred point.
    pub dual: CMatrix,
    pub newton_steps: usize,
    /// Newton decrement at termination.
    pub decrement: f64,
}

impl LmiProblem {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &RVector) -> CMatrix {
        let mut f = self.constant.clone();
        for (k, fk) in self.coefficients.iter().enumerate() {
            if x[k] != 0.0 {
                f += fk * C64::new(x[k], 0.0);
            }
        }
        f
    }

    fn validate(&self, x0: &RVector) -> Result<()> {
        let n = self.size();
        if !self.constant.is_square() {
            return Err(Error::Shape("LMI constant term is not square".into()));
        }
        if self.objective.len() != self.coefficients.len() || x0.len() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "objective has {} entries, {} coefficient matrices, start point {}",
                self.objective.len(),
                self.coefficients.len(),
                x0.len()
            )));
        }
        if self.coefficients.iter().any(|f| f.shape() != (n, n)) {
            return Err(Error::Shape("LMI coefficient size mismatch".into()));
        }
        Ok(())
    }
}

struct Reduced {
    /// Columns span the directions that actually move F.
    basis: RMatrix,
    coefficients: Vec<CMatrix>,
    objective: RVector,
}

fn reduce(problem: &LmiProblem) -> Result<Reduced> {
    let m = problem.coefficients.len();
    let gram = RMatrix::from_fn(m, m, |k, l| hs_inner(&problem.coefficients[k], &problem.coefficients[l]).re);
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let mut keep = Vec::new();
    for k in 0..m {
        let v = eig.eigenvectors.column(k);
        if eig.eigenvalues[k] > 1e-13 * scale && scale > 0.0 {
            keep.push(v.into_owned());
        } else {
            let slope = problem.objective.dot(&v);
            if slope.abs() > 1e-10 * problem.objective.norm().max(1.0) {
                return Err(Error::Solver {
                    message: "objective decreases along a direction that leaves the LMI unchanged".into(),
                    iterations: 0,
                    gap: f64::INFINITY,
                    residual: slope.abs(),
                });
            }
        }
    }
    let basis = if keep.is_empty() { RMatrix::zeros(m, 0) } else { RMatrix::from_columns(&keep) };
    let coefficients = (0..basis.ncols())
        .map(|j| {
            let mut g = CMatrix::zeros(problem.size(), problem.size());
            for k in 0..m {
                let w = basis[(k, j)];
                if w != 0.0 {
                    g += &problem.coefficients[k] * C64::new(w, 0.0);
                }
            }
            g
        })
        .collect();
    let objective = basis.transpose() * &problem.objective;
    Ok(Reduced { basis, coefficients, objective })
}

fn cholesky(f: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let chol = f.clone().cholesky()?;
    let l = chol.l_dirty();
    if (0..l.nrows()).all(|i| l[(i, i)].re.is_finite() && l[(i, i)].re > 0.0) {
        Some(chol)
    } else {
        None
    }
}

fn log_det(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// Solves the LMI from a strictly feasible start `x0`.
pub fn solve(problem: &LmiProblem, x0: &RVector, options: &LmiOptions) -> Result<LmiSolution> {
    problem.validate(x0)?;
    let n = problem.size() as f64;
    let f0 = problem.evaluate(x0);
    if cholesky(&f0).is_none() {
        return Err(Error::Solver {
            message: "start point is not strictly feasible".into(),
            iterations: 0,
            gap: f64::INFINITY,
            residual: 0.0,
        });
    }
    let red = reduce(problem)?;
    let p = red.coefficients.len();
    let base_value = problem.objective.dot(x0);

    let mut y = RVector::zeros(p);
    let eval = |y: &RVector| {
        let mut f = f0.clone();
        for (k, g) in red.coefficients.iter().enumerate() {
            if y[k] != 0.0 {
                f += g * C64::new(y[k], 0.0);
            }
        }
        f
    };

    if p == 0 {
        let chol = cholesky(&f0).expect("checked above");
        let dual = chol.inverse() * C64::new(0.0, 0.0);
        return Ok(LmiSolution { x: x0.clone(), value: base_value, gap: 0.0, dual, newton_steps: 0, decrement: 0.0 });
    }

    let scale = base_value.abs().max(1.0);
    let mut t = n / scale;
    let mut steps = 0usize;
    let mut decrement = f64::INFINITY;
    loop {
        // Centre at the current barrier weight.
        let mut centred = false;
        for _ in 0..100 {
            if steps >= options.max_newton {
                break;
            }
            steps += 1;
            let f = eval(&y);
            let chol = cholesky(&f).ok_or_else(|| Error::Solver {
                message: "iterate left the feasible cone".into(),
                iterations: steps,
                gap: n / t,
                residual: 0.0,
            })?;
            let scaled: Vec<CMatrix> = red
                .coefficients
                .iter()
                .map(|g| {
                    let half = chol.l_dirty().solve_lower_triangular(g).expect("nonsingular factor");
                    chol.l_dirty().solve_lower_triangular(&half.adjoint()).expect("nonsingular factor")
                })
                .collect();
            let mut grad = RVector::zeros(p);
            let mut hess = RMatrix::zeros(p, p);
            for k in 0..p {
                let tr: C64 = scaled[k].diagonal().iter().sum();
                grad[k] = t * red.objective[k] - tr.re;
                for l in 0..=k {
                    let v = hs_inner(&scaled[k], &scaled[l]).re;
                    hess[(k, l)] = v;
                    hess[(l, k)] = v;
                }
            }
            let step = newton_direction(&hess, &grad);
            let lambda_sq = -grad.dot(&step);
            decrement = lambda_sq.max(0.0).sqrt();
            if lambda_sq <= 1e-12 {
                centred = true;
                break;
            }
            let phi0 = t * red.objective.dot(&y) - log_det(&chol);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = &y + &step * alpha;
                if let Some(c) = cholesky(&eval(&trial)) {
                    let phi = t * red.objective.dot(&trial) - log_det(&c);
                    if phi <= phi0 - 0.25 * alpha * lambda_sq {
                        y = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No further progress possible in double precision.
                centred = lambda_sq < 1e-6;
                break;
            }
        }
        let gap = n / t;
        if gap <= options.gap_tol {
            if !centred && decrement > 1e-2 {
                return Err(Error::Solver {
                    message: "could not re-centre at the final barrier weight".into(),
                    iterations: steps,
                    gap,
                    residual: decrement,
                });
            }
            break;
        }
        if steps >= options.max_newton {
            return Err(Error::Solver {
                message: "Newton step budget exhausted".into(),
                iterations: steps,
                gap,
                residual: decrement,
            });
        }
        t *= options.growth;
    }

    let x = x0 + &red.basis * &y;
    let f = problem.evaluate(&x);
    let chol = cholesky(&f).ok_or_else(|| Error::Numeric("final iterate not strictly feasible".into()))?;
    let dual = chol.inverse() * C64::new(1.0 / t, 0.0);
    Ok(LmiSolution { value: problem.objective.dot(&x), x, gap: n / t, dual, newton_steps: steps, decrement })
}

fn newton_direction(hess: &RMatrix, grad: &RVector) -> RVector {
    if let Some(ch) = hess.clone().cholesky() {
        let step = ch.solve(&(-grad));
        if step.iter().all(|v| v.is_finite()) {
            return step;
        }
    }
    // Severely ill-conditioned Hessian: fall back to a regularized
    // eigen-solve.
    let eig = hess.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let floor = top * 1e-15;
    let rhs = eig.eigenvectors.transpose() * (-grad);
    let scaled = RVector::from_fn(rhs.len(), |i, _| rhs[i] / eig.eigenvalues[i].max(floor).max(f64::MIN_POSITIVE));
    &eig.eigenvectors * scaled
}
