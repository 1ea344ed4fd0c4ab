//! Moment relaxation bounding the score of strategies without entanglement.
//!
//! * [`symmetry`]: the four relabeling generators of the game.
//! * [`reduced`]: the symmetrized minor `Ḡ` with `d(d+1)+2` unknowns.
//! * [`blocks`]: simultaneous block diagonalization of its structure matrices.
//! * [`solve`]: the reduced program, its optimum and dual certificate.
//! * [`certificate`]: independent verification of certificates.
//! * [`full`]: the unsymmetrized moment matrix at `d = 3`, for cross-checks.

pub mod blocks;
pub mod certificate;
pub mod full;
pub mod reduced;
pub mod solve;
pub mod symmetry;

pub use blocks::{block_diagonalize_family, BlockDiagonalizer, BlockInfo};
pub use certificate::{verify_certificate, CertificateResiduals, DualCertificate, VerificationReport};
pub use reduced::{assignment_from_product, group_probabilities, symbol_at, Assignment, ReducedMomentModel, Row, Symbol};
pub use solve::{
    reduced_program, solve_dual, solve_primal, solve_reduced, FreeVar, PrimalSolution, ReducedProgram,
    ReducedSolution, RelaxationOptions, TransformedModel,
};
pub use full::{solve_full, FullMomentModel, FullSolution, Letter, MonomialIndex, Word};
pub use symmetry::{symmetry_actions, Event, Generator, SymmetryActions};

/// Builds the block transform of a reduced model.
pub fn block_diagonalize(model: &ReducedMomentModel, seed: u64) -> BlockDiagonalizer {
    block_diagonalize_family(&model.structure, model.size, seed)
}
