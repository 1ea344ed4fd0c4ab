//! Semidefinite programming in standard conic form.
//!
//! [`ConicProgram`] holds `opt ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0` over a
//! product of PSD and nonnegative-diagonal blocks, with all matrices stored
//! sparsely by their upper triangle. [`solve`] runs a primal-dual
//! interior-point method (Nesterov–Todd scaling, Mehrotra predictor-corrector)
//! and returns both the primal blocks and the dual multipliers. Programs whose
//! dual slack is singular on every feasible point are shrunk to a smaller face
//! before solving and lifted back afterwards.
//!
//! Hermitian data enters through [`embed_complex`]; programs can be written
//! to and read from SDPA sparse files for cross-checks with other solvers.

mod embed;
mod presolve;
mod program;
mod sdpa;
mod solver;

pub use embed::{complexify, embed_complex, embed_hermitian_entries, embed_sparse};
pub use program::{BlockKind, BlockSpec, ConicProgram, Constraint, Sense, SparseSym};
pub use sdpa::{export_sdpa, parse_sdpa, read_sdpa, write_sdpa};
pub use solver::{solve, SdpSolution, SdpStatus, SolverOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed program: {0}")]
    Malformed(String),

    #[error("SDPA parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
