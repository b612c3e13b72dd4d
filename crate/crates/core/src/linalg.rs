//! Dense complex-matrix substrate.
//!
//! Everything in the crate is expressed in terms of `nalgebra` dense matrices
//! over `Complex64`. This module adds the pieces the metrology pipeline needs
//! on top: Hilbert–Schmidt geometry, row-major vectorization, Schatten norms,
//! deterministic Hermitian spectral decompositions, rank-tolerant
//! pseudoinverses and PSD square roots, and projection onto real spans of
//! Hermitian operators.
//!
//! Rank decisions are always relative: a singular value `σ` counts as zero
//! when `σ <= rank_tol * σ_max`.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Relative anti-Hermitian residual below which a matrix is silently symmetrized.
pub const HERMITIAN_SNAP_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// The Hermitian `K` with `M = hermitian_part(M) + iK`, i.e. `(M − M†)/(2i)`.
pub fn anti_hermitian_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * C64::new(0.0, -0.5)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn ensure_finite(m: &CMatrix) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::Numeric("matrix has non-finite entries".into()))
    }
}

/// `‖M − M†‖_HS / 2`.
pub fn anti_hermitian_residual(m: &CMatrix) -> f64 {
    hs_norm(&(m - m.adjoint())) * 0.5
}

/// Returns `(M + M†)/2` if `M` is Hermitian up to rounding, otherwise a
/// symmetry error.
pub fn ensure_hermitian(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    ensure_finite(m)?;
    let residual = anti_hermitian_residual(m);
    if residual <= HERMITIAN_SNAP_TOL * hs_norm(m).max(f64::MIN_POSITIVE) || residual == 0.0 {
        Ok(hermitian_part(m))
    } else {
        Err(Error::Symmetry { residual })
    }
}

/// Row-major vectorization `|M⟩⟩ = Σ_jk ⟨j|M|k⟩ |j⟩|k⟩`, so `|i⟩⟨j|` maps to
/// the basis vector with index `i·d + j`.
pub fn vectorize(m: &CMatrix) -> CVector {
    let (rows, cols) = m.shape();
    CVector::from_fn(rows * cols, |idx, _| m[(idx / cols, idx % cols)])
}

pub fn devectorize(v: &CVector, dim: usize) -> Result<CMatrix> {
    if v.len() != dim * dim {
        return Err(Error::Shape(format!("vector of length {} is not {}x{}", v.len(), dim, dim)));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]))
}

/// Vectorizes a pair of equally sized square matrices and returns their
/// Hilbert–Schmidt overlap `⟨⟨A|B⟩⟩ = Tr(A†B)`.
pub fn vectorize_pair(a: &CMatrix, b: &CMatrix) -> Result<(CVector, CVector, C64)> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Shape(format!("expected equal square matrices, got {:?} and {:?}", a.shape(), b.shape())));
    }
    let va = vectorize(a);
    let vb = vectorize(b);
    let inner = va.dotc(&vb);
    Ok((va, vb, inner))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// `(‖M‖₁, ‖M‖)`: sum of singular values and the largest one.
pub fn schatten_norms(m: &CMatrix) -> Result<(f64, f64)> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let sv = singular_values(m)?;
    let trace_norm = sv.iter().sum();
    let op_norm = sv.first().copied().unwrap_or(0.0);
    Ok((trace_norm, op_norm))
}

pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Thin SVD `M = U Σ V†` with singular values sorted in descending order.
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    ensure_finite(m)?;
    let raw = m.clone().svd(true, true);
    let u = raw.u.ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
    let v_t = raw.v_t.ok_or_else(|| Error::Numeric("SVD did not return V†".into()))?;
    let mut order: Vec<usize> = (0..raw.singular_values.len()).collect();
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));
    let k = order.len();
    let mut su = CMatrix::zeros(u.nrows(), k);
    let mut sv = CMatrix::zeros(v_t.ncols(), k);
    let mut values = Vec::with_capacity(k);
    for (col, &idx) in order.iter().enumerate() {
        su.set_column(col, &u.column(idx));
        sv.set_column(col, &v_t.row(idx).adjoint());
        values.push(raw.singular_values[idx]);
    }
    Ok(Svd { u: su, singular_values: values, v: sv })
}

/// Moore–Penrose pseudoinverse; singular values at or below
/// `rank_tol·σ_max` are treated as zero.
pub fn pseudoinverse(m: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    if m.is_empty() {
        return Ok(CMatrix::zeros(m.ncols(), m.nrows()));
    }
    let dec = svd(m)?;
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rank_tol * smax;
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let vk = dec.v.column(k);
            let uk = dec.u.column(k);
            out += (vk * uk.adjoint()) * C64::new(1.0 / s, 0.0);
        }
    }
    Ok(out)
}

pub fn numerical_rank(m: &CMatrix, rank_tol: f64) -> Result<usize> {
    let sv = singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > rank_tol * smax && s > 0.0).count())
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are in descending
/// order; each eigenvector's largest-modulus component is made real positive
/// so the decomposition is reproducible.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Σ_k f(λ_k) |v_k⟩⟨v_k|`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w != 0.0 {
                let v = self.vectors.column(k);
                out += (v * v.adjoint()) * C64::new(w, 0.0);
            }
        }
        out
    }
}

pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let h = ensure_hermitian(m)?;
    let n = h.nrows();
    if n == 0 {
        return Ok(HermitianEigen { values: Vec::new(), vectors: CMatrix::zeros(0, 0) });
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &idx) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, z)| if z.norm() > best.1 + 1e-12 { (i, z.norm()) } else { best })
            .0;
        let phase = v[pivot] / v[pivot].norm();
        v /= phase;
        vectors.set_column(col, &v);
        values.push(eig.eigenvalues[idx]);
    }
    Ok(HermitianEigen { values, vectors })
}

/// Principal square root `C = X^{1/2}` of a PSD matrix, so `CC† = X`.
/// Eigenvalues within `rank_tol·λ_max` of zero are clamped; anything more
/// negative is a spectrum error.
pub fn psd_factor(x: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(x)?;
    let scale = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let floor = -rank_tol * scale;
    if let Some(&bad) = eig.values.iter().find(|&&v| v < floor) {
        return Err(Error::Spectrum { eigenvalue: bad });
    }
    let cutoff = rank_tol * scale;
    Ok(eig.reconstruct_with(|lam| if lam > cutoff { lam.sqrt() } else { 0.0 }))
}

/// Orthogonal projector onto the span of the given columns.
pub fn column_projector(vectors: &CMatrix) -> CMatrix {
    vectors * vectors.adjoint()
}

/// Orthonormal basis (columns) of the null space of a real matrix.
pub fn real_null_space(a: &RMatrix, rank_tol: f64) -> RMatrix {
    let n = a.ncols();
    if n == 0 {
        return RMatrix::zeros(0, 0);
    }
    // Pad with zero rows so the SVD returns a full right basis.
    let rows = a.nrows().max(n);
    let mut padded = RMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let dec = padded.svd(false, true);
    let v_t = dec.v_t.expect("requested V^T");
    let smax = dec.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = rank_tol * smax;
    let cols: Vec<RVector> = (0..dec.singular_values.len())
        .filter(|&k| smax == 0.0 || dec.singular_values[k] <= cutoff)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        RMatrix::zeros(n, 0)
    } else {
        RMatrix::from_columns(&cols)
    }
}

/// Real Moore–Penrose pseudoinverse with a relative cutoff.
pub fn real_pseudoinverse(a: &RMatrix, rank_tol: f64) -> RMatrix {
    if a.is_empty() {
        return RMatrix::zeros(a.ncols(), a.nrows());
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^T");
    let smax = dec.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let mut out = RMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > rank_tol * smax && s > 0.0 {
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Real coordinates of a Hermitian matrix in the orthonormal (under the HS
/// inner product) basis {E_kk, (E_kl+E_lk)/√2, i(E_kl−E_lk)/√2}.
pub fn hermitian_coordinates(m: &CMatrix) -> RVector {
    let d = m.nrows();
    let mut out = RVector::zeros(d * d);
    let mut idx = 0;
    for k in 0..d {
        out[idx] = m[(k, k)].re;
        idx += 1;
    }
    let s = std::f64::consts::SQRT_2;
    for k in 0..d {
        for l in (k + 1)..d {
            // Average the two triangles so slightly non-Hermitian input is
            // read consistently.
            let z = (m[(k, l)] + m[(l, k)].conj()) * 0.5;
            out[idx] = s * z.re;
            out[idx + 1] = -s * z.im;
            idx += 2;
        }
    }
    out
}

pub fn hermitian_from_coordinates(coords: &RVector, d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    let mut idx = 0;
    for k in 0..d {
        m[(k, k)] = c64(coords[idx], 0.0);
        idx += 1;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        for l in (k + 1)..d {
            let z = c64(s * coords[idx], -s * coords[idx + 1]);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Real span of Hermitian `d×d` operators with an HS-orthonormal basis.
#[derive(Debug, Clone)]
pub struct HermitianSpan {
    dim: usize,
    basis: Vec<CMatrix>,
}

impl HermitianSpan {
    pub fn empty(dim: usize) -> Self {
        Self { dim, basis: Vec::new() }
    }

    /// Modified Gram–Schmidt (two passes) over the generators; a generator
    /// whose residual falls below `rank_tol` times its own norm is dropped.
    /// Generators must be Hermitian up to rounding.
    pub fn from_generators<I>(dim: usize, generators: I, rank_tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = CMatrix>,
    {
        let mut span = Self::empty(dim);
        for g in generators {
            span.push(&g, rank_tol)?;
        }
        Ok(span)
    }

    /// Adds a generator; returns whether it enlarged the span.
    pub fn push(&mut self, generator: &CMatrix, rank_tol: f64) -> Result<bool> {
        if generator.shape() != (self.dim, self.dim) {
            return Err(Error::Shape(format!(
                "generator {:?} does not match span dimension {}",
                generator.shape(),
                self.dim
            )));
        }
        let g = ensure_hermitian(generator)?;
        let norm0 = hs_norm(&g);
        if norm0 == 0.0 {
            return Ok(false);
        }
        let mut r = g;
        for _ in 0..2 {
            for b in &self.basis {
                let coef = hs_inner(b, &r).re;
                r -= b * C64::new(coef, 0.0);
            }
        }
        let norm = hs_norm(&r);
        if norm <= rank_tol * norm0 || norm <= 1e-14 * norm0.max(1.0) {
            return Ok(false);
        }
        self.basis.push(hermitian_part(&r) / C64::new(norm, 0.0));
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// Splits a Hermitian `M` into its component inside the span and the
    /// HS-orthogonal remainder.
    pub fn project(&self, m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        if m.shape() != (self.dim, self.dim) {
            return Err(Error::Shape(format!("{:?} vs span dimension {}", m.shape(), self.dim)));
        }
        let h = ensure_hermitian(m)?;
        let mut outside = h.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let coef = hs_inner(b, &outside).re;
                outside -= b * C64::new(coef, 0.0);
            }
        }
        let outside = hermitian_part(&outside);
        let inside = &h - &outside;
        Ok((inside, outside))
    }

    /// HS distance of `M` from the span.
    pub fn distance(&self, m: &CMatrix) -> Result<f64> {
        Ok(hs_norm(&self.project(m)?.1))
    }
}
