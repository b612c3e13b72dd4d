//! Standard-quantum-limit bounds for estimating a Hamiltonian parameter
//! under Markovian noise, the approximate error-correcting codes that attain
//! them, and brute-force oracles that check both.
//!
//! The usual entry point is [`pipeline::run_pipeline`] on a [`NoiseModel`].

// Guards such as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biased;
pub mod bound;
pub mod channel;
pub mod code;
pub mod dephasing;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod oracle;
pub mod pipeline;

pub use bound::DualSolution;
pub use channel::{EffectiveChannel, RecoveryChannel};
pub use code::{GaugeFrame, PerturbationCode};
pub use dephasing::DephasingSpec;
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use model::{Bias, NoiseModel};
pub use oracle::OracleReport;
pub use pipeline::{PipelineOptions, PipelineResult};
