use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite or ill-conditioned numerics: {0}")]
    Numeric(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    Spectrum { eigenvalue: f64 },

    #[error("matrix is not Hermitian (anti-Hermitian residual {residual:e})")]
    Symmetry { residual: f64 },

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("malformed document: {0}")]
    Parse(String),

    /// The signal Hamiltonian lies outside the Lindblad span, so there is no
    /// finite standard-quantum-limit bound.
    #[error("HNLS holds; Heisenberg limit achievable (distance from Lindblad span {distance:e})")]
    HlAchievable { distance: f64 },

    #[error("Hamiltonian lies in the span generated by the strong noise operators (distance {distance:e})")]
    StrongSpanViolation { distance: f64 },

    #[error("solver failed after {iterations} iterations: {message} (gap {gap:e}, residual {residual:e})")]
    Solver { message: String, iterations: usize, gap: f64, residual: f64 },

    #[error("signal vanishes on the constraint subspace")]
    ZeroSignal,

    #[error(
        "code support system has no PSD solution (constraint residual {residual:e}, min eigenvalue {min_eigenvalue:e})"
    )]
    Infeasible { residual: f64, min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("state outside the code space (leakage {leakage:e})")]
    Domain { leakage: f64 },
}
