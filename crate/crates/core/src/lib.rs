//! Bound entangled states in a prepare-and-measure communication game.
//!
//! Alice and Bob each encode a pair of digits into one share of a shared
//! bipartite state; Charlie measures both shares and tries to output a
//! linear function of the inputs. Without entanglement the average winning
//! probability is at most `2/(d+1)`. This crate builds a 3⊗3 PPT entangled
//! state that beats the bound, searches for better strategies in higher
//! dimension by alternating semidefinite programs, and proves the bound for
//! unentangled strategies with a symmetrized moment relaxation whose dual
//! solution is checked independently.
//!
//! * [`qobjects`]: states, Weyl–Heisenberg unitaries, MUBs, Bell bases, measurements.
//! * [`witness`]: PPT and realignment tests.
//! * [`game`]: winning rule, quantum and classical scores, noise thresholds.
//! * [`seesaw`]: alternating optimization over PPT states and measurements.
//! * [`relaxation`]: moment relaxations, symmetry reduction and certificates.

pub(crate) mod error;
pub mod game;
pub mod qobjects;
pub mod relaxation;
pub mod seesaw;
pub mod witness;

pub use error::{Error, Result};
