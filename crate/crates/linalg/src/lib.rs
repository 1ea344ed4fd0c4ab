//! Dense complex linear algebra for bipartite quantum systems.
//!
//! Everything here works on small dense matrices (a few thousand rows at
//! most). [`ComplexMatrix`] wraps a `nalgebra` matrix and adds the
//! quantum-information helpers the rest of the workspace needs: Kronecker
//! products, partial transposes, realignment, Hermitian spectra, trace norms,
//! Haar-random unitaries and orthonormal Hermitian operator bases.

mod basis;
mod error;
mod matrix;
mod ops;
mod random;
mod spectrum;

pub use basis::hermitian_basis;
pub use error::LinalgError;
pub use matrix::{ComplexMatrix, Ket};
pub use ops::{kron, partial_trace, partial_transpose, realignment_matrix, Subsystem};
pub use random::{random_unitary, random_unitary_with, unit_ket_with};
pub use spectrum::{eigh, real_symmetric_eigh, trace_norm, HermitianSpectrum, RealSpectrum};

pub use num_complex::Complex64;

/// Tolerance used when a matrix is required to be Hermitian on input.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;
