//! The prepare-and-measure game.
//!
//! Alice receives `x = (x₀, x₁)`, Bob `y = (y₀, y₁)`, both in `[d]²`, and each
//! sends a `d`-dimensional message to Charlie, who gets `z ∈ [d+1]` and must
//! output `w_z(x, y)`:
//!
//! * `w_z = x₁ + y₁ − 2z(x₀ − y₀) mod d` for `z < d`,
//! * `w_d = x₀ − y₀ mod d`.
//!
//! The score `R_d` is the winning probability averaged over all
//! `d⁴(d+1)` input triples. Models without entanglement reach at most
//! `2/(d+1)`.

mod classical;
mod quantum;

pub use classical::{
    best_response, canonical_encoding, classical_counts, classical_exact_max, classical_wins, restricted_growth_strings,
    score_classical, ClassicalMax, ClassicalStrategy, Decoder,
};
pub use quantum::{
    bell_diagnostics, measurement_operators, noise_threshold, noise_tolerance, paper_strategy_d3, score_quantum,
    score_with_state_operator, state_operator, BellDiagnostics, QuantumStrategy,
};

use serde::{Deserialize, Serialize};

use crate::qobjects::{is_prime, modd};
use crate::{Error, Result};

/// Input pair `(x₀, x₁)`.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub d: usize,
}

impl GameSpec {
    pub fn new(d: usize) -> Result<Self> {
        if !is_prime(d) {
            return Err(Error::Unsupported { d, reason: "the game is defined for prime d".into() });
        }
        Ok(GameSpec { d })
    }

    /// Number of `(x, y, z)` triples, `d⁴(d+1)`.
    pub fn num_triples(&self) -> usize {
        self.d.pow(4) * (self.d + 1)
    }

    pub fn num_settings(&self) -> usize {
        self.d + 1
    }

    /// Bound on `R_d` without entanglement, `2/(d+1)`.
    pub fn bound(&self) -> f64 {
        2.0 / (self.d as f64 + 1.0)
    }

    /// Pair with flat index `i = x₀·d + x₁`.
    pub fn pair(&self, i: usize) -> Pair {
        (i / self.d, i % self.d)
    }

    /// Correct answer, without range checks.
    #[inline]
    pub fn win(&self, x: Pair, y: Pair, z: usize) -> usize {
        let d = self.d;
        let (x0, x1, y0, y1) = (x.0 as i64, x.1 as i64, y.0 as i64, y.1 as i64);
        if z == d {
            modd(x0 - y0, d)
        } else {
            modd(x1 + y1 - 2 * z as i64 * (x0 - y0), d)
        }
    }
}

/// Correct answer `w_z(x, y)` with input validation.
pub fn winning_answer(d: usize, x: Pair, y: Pair, z: usize) -> Result<usize> {
    let spec = GameSpec::new(d)?;
    if [x.0, x.1, y.0, y.1].iter().any(|&v| v >= d) || z > d {
        return Err(Error::InvalidArgument(format!("inputs x={x:?}, y={y:?}, z={z} out of range for d = {d}")));
    }
    Ok(spec.win(x, y, z))
}
