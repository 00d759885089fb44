//! Single-qubit reaped state tomography.
//!
//! An unknown pure state of `n` qudits is coupled to one pointer qubit through a
//! pointer-controlled unitary `V = exp(iθP)`. The system is read out in the
//! computational basis and the pointer in one of the three Pauli bases, giving
//! six outcomes per basis index `x`. From those statistics the wavefunction is
//! recovered either by solving a linear system ([`exact`]) or by an iterative
//! maximum-likelihood fixed point ([`mle`]).
//!
//! Basis indices follow the little-endian digit convention
//! `x = x_1 + x_2·d + … + x_n·d^{n-1}`: particle 1 is the least significant digit.

pub mod coupling;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod measurement;
pub mod mle;
pub mod statevec;

pub use coupling::{CouplingOperator, CouplingSpec, CouplingVariant};
pub use error::{Result, TomoError};
pub use exact::{reconstruct, ReconstructionResult, ReconstructionWarning};
pub use measurement::{joint_probabilities, sample_counts, CountTable, Outcome, ProbabilityTable};
pub use mle::{CountWeights, MLConfig, MLState};
pub use statevec::{fidelity, Dims, StateVector};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
