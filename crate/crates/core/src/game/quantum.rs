use boundent_linalg::{Complex64, ComplexMatrix};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GameSpec;
use crate::qobjects::{
    bell_decomposition, bound_entangled_state, encoding_unitaries, isotropic_mix, paper_measurements_d3,
    BellDecomposition, DensityMatrix, Povm, UnitaryFamily,
};
use crate::{Error, Result};

/// Shared state, unitary encodings for Alice (first factor) and Bob (second
/// factor), and one measurement per `z` on the joint message space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantumStrategy {
    pub state: DensityMatrix,
    pub alice: UnitaryFamily,
    pub bob: UnitaryFamily,
    pub measurements: Vec<Povm>,
}

impl QuantumStrategy {
    pub fn validate(&self, spec: &GameSpec) -> Result<()> {
        let d = spec.d;
        if self.state.dim_a != d || self.state.dim_b != d {
            return Err(Error::InvalidArgument(format!(
                "state is {}x{}, game needs {d}x{d}",
                self.state.dim_a, self.state.dim_b
            )));
        }
        check_encodings(spec, &self.alice, &self.bob)?;
        check_measurements(spec, &self.measurements)
    }

    /// Same strategy with a different shared state.
    pub fn with_state(&self, state: DensityMatrix) -> QuantumStrategy {
        QuantumStrategy { state, ..self.clone() }
    }
}

fn check_encodings(spec: &GameSpec, alice: &UnitaryFamily, bob: &UnitaryFamily) -> Result<()> {
    for (who, fam) in [("Alice", alice), ("Bob", bob)] {
        if fam.d != spec.d || fam.len() != spec.d * spec.d {
            return Err(Error::InvalidArgument(format!("{who}'s encodings do not match d = {}", spec.d)));
        }
    }
    Ok(())
}

fn check_measurements(spec: &GameSpec, measurements: &[Povm]) -> Result<()> {
    let d = spec.d;
    if measurements.len() != d + 1 {
        return Err(Error::InvalidArgument(format!("need {} measurements, got {}", d + 1, measurements.len())));
    }
    for (z, m) in measurements.iter().enumerate() {
        if m.outcomes() != d || m.dim() != d * d {
            return Err(Error::InvalidArgument(format!(
                "measurement {z} has {} outcomes on dimension {}",
                m.outcomes(),
                m.dim()
            )));
        }
    }
    Ok(())
}

/// `ρ_BE` with Weyl–Heisenberg encodings and the four product measurements.
pub fn paper_strategy_d3() -> QuantumStrategy {
    QuantumStrategy {
        state: bound_entangled_state(),
        alice: encoding_unitaries(3),
        bob: encoding_unitaries(3),
        measurements: paper_measurements_d3(),
    }
}

/// `(U ⊗ I) M (U ⊗ I)†` when `first`, else `(I ⊗ U) M (I ⊗ U)†`. Zero entries
/// of `U` are skipped, so monomial unitaries cost `O(d⁴)`.
fn conj_local(m: &DMatrix<Complex64>, u: &DMatrix<Complex64>, d: usize, first: bool) -> DMatrix<Complex64> {
    let n = d * d;
    let zero = Complex64::new(0.0, 0.0);
    let idx = |outer: usize, inner: usize| if first { outer * d + inner } else { inner * d + outer };
    let mut t = DMatrix::from_element(n, n, zero);
    for col in 0..n {
        for a in 0..d {
            for p in 0..d {
                let up = u[(a, p)];
                if up == zero {
                    continue;
                }
                for b in 0..d {
                    t[(idx(a, b), col)] += up * m[(idx(p, b), col)];
                }
            }
        }
    }
    let mut r = DMatrix::from_element(n, n, zero);
    for a in 0..d {
        for p in 0..d {
            let up = u[(a, p)].conj();
            if up == zero {
                continue;
            }
            for b in 0..d {
                let (dst, src) = (idx(a, b), idx(p, b));
                for row in 0..n {
                    r[(row, dst)] += t[(row, src)] * up;
                }
            }
        }
    }
    r
}

/// Applies `f(x, y, ρ_xy)` to every encoded state `(U_x ⊗ U_y) ρ (U_x ⊗ U_y)†`
/// and collects the per-`x` results in input order.
fn for_encoded_states<T: Send>(
    spec: &GameSpec,
    alice: &UnitaryFamily,
    bob: &UnitaryFamily,
    rho: &ComplexMatrix,
    f: impl Fn(usize, usize, &DMatrix<Complex64>) -> T + Sync,
) -> Vec<Vec<T>> {
    let d = spec.d;
    (0..d * d)
        .into_par_iter()
        .map(|x| {
            let rx = conj_local(rho.as_inner(), alice.unitaries[x].as_inner(), d, true);
            (0..d * d)
                .map(|y| {
                    let rxy = conj_local(&rx, bob.unitaries[y].as_inner(), d, false);
                    f(x, y, &rxy)
                })
                .collect()
        })
        .collect()
}

/// `tr(A B)` for column-major dense matrices.
fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Average winning probability `R_d`.
pub fn score_quantum(spec: &GameSpec, strategy: &QuantumStrategy) -> Result<f64> {
    strategy.validate(spec)?;
    let d = spec.d;
    let per_x = for_encoded_states(spec, &strategy.alice, &strategy.bob, &strategy.state.matrix, |x, y, rxy| {
        let (xp, yp) = (spec.pair(x), spec.pair(y));
        (0..=d)
            .map(|z| {
                let c = spec.win(xp, yp, z);
                trace_product(rxy, strategy.measurements[z].effects[c].as_inner()).re
            })
            .sum::<f64>()
    });
    let total: f64 = per_x.iter().flatten().sum();
    Ok(total / spec.num_triples() as f64)
}

/// The operator `W` with `R_d = tr(ρ W)` for fixed encodings and
/// measurements: `W = (1/N) Σ_{x,y} V_xy† (Σ_z M_{w_z(x,y)|z}) V_xy`.
pub fn state_operator(
    spec: &GameSpec,
    alice: &UnitaryFamily,
    bob: &UnitaryFamily,
    measurements: &[Povm],
) -> Result<ComplexMatrix> {
    check_encodings(spec, alice, bob)?;
    check_measurements(spec, measurements)?;
    let d = spec.d;
    let n = d * d;
    let per_x: Vec<DMatrix<Complex64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let ux = alice.unitaries[x].adjoint();
            let mut acc = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
            for y in 0..n {
                let (xp, yp) = (spec.pair(x), spec.pair(y));
                let mut k = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
                for (z, m) in measurements.iter().enumerate() {
                    k += m.effects[spec.win(xp, yp, z)].as_inner();
                }
                let uy = bob.unitaries[y].adjoint();
                acc += conj_local(&conj_local(&k, ux.as_inner(), d, true), uy.as_inner(), d, false);
            }
            acc
        })
        .collect();
    let mut w = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for m in &per_x {
        w += m;
    }
    Ok(ComplexMatrix::from(w).scale(1.0 / spec.num_triples() as f64).hermitian_part())
}

/// Operators `B_{c,z} = (1/N) Σ_{x,y : w_z(x,y) = c} ρ_xy`, indexed `[z][c]`,
/// with `R_d = Σ_{z,c} tr(B_{c,z} M_{c|z})`.
pub fn measurement_operators(
    spec: &GameSpec,
    alice: &UnitaryFamily,
    bob: &UnitaryFamily,
    state: &DensityMatrix,
) -> Result<Vec<Vec<ComplexMatrix>>> {
    check_encodings(spec, alice, bob)?;
    let d = spec.d;
    let n = d * d;
    let zero = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let per_x: Vec<Vec<Vec<DMatrix<Complex64>>>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let rx = conj_local(state.matrix.as_inner(), alice.unitaries[x].as_inner(), d, true);
            let mut acc = vec![vec![zero.clone(); d]; d + 1];
            for y in 0..n {
                let rxy = conj_local(&rx, bob.unitaries[y].as_inner(), d, false);
                let (xp, yp) = (spec.pair(x), spec.pair(y));
                for (z, row) in acc.iter_mut().enumerate() {
                    row[spec.win(xp, yp, z)] += &rxy;
                }
            }
            acc
        })
        .collect();
    let scale = 1.0 / spec.num_triples() as f64;
    let mut out = vec![vec![zero.clone(); d]; d + 1];
    for part in &per_x {
        for (z, row) in part.iter().enumerate() {
            for (c, m) in row.iter().enumerate() {
                out[z][c] += m;
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|row| row.into_iter().map(|m| ComplexMatrix::from(m).scale(scale).hermitian_part()).collect())
        .collect())
}

/// `tr(ρ W)` for a precomputed [`state_operator`].
pub fn score_with_state_operator(w: &ComplexMatrix, rho: &ComplexMatrix) -> f64 {
    rho.trace_product(w).re
}

/// Largest isotropic-noise weight `ν` for which the strategy still scores
/// above `bound`, by bisection to below `1e-12`.
pub fn noise_threshold(spec: &GameSpec, strategy: &QuantumStrategy, bound: f64) -> Result<f64> {
    strategy.validate(spec)?;
    let w = state_operator(spec, &strategy.alice, &strategy.bob, &strategy.measurements)?;
    let score = |nu: f64| -> Result<f64> {
        Ok(score_with_state_operator(&w, &isotropic_mix(&strategy.state, nu)?.matrix))
    };
    let s0 = score(0.0)?;
    if s0 <= bound {
        return Err(Error::NoViolation { value: s0, bound });
    }
    if score(1.0)? > bound {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if score(mid)? > bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form threshold for a score affine in the noise weight: the
/// noise at which `R(ν) = (1 − ν) R + ν/d` reaches `bound`.
pub fn noise_tolerance(score: f64, uniform_score: f64, bound: f64) -> f64 {
    ((score - bound) / (score - uniform_score)).clamp(0.0, 1.0)
}

/// Scores of the Bell-basis components of a Bell-diagonal state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellDiagnostics {
    pub decomposition: BellDecomposition,
    /// `R_d(|ψ_k⟩⟨ψ_k|)` in basis order.
    pub scores: Vec<f64>,
    /// `Σ_k q_k R_d(|ψ_k⟩)`.
    pub weighted_sum: f64,
    pub state_score: f64,
}

pub fn bell_diagnostics(spec: &GameSpec, strategy: &QuantumStrategy, tol: f64) -> Result<BellDiagnostics> {
    strategy.validate(spec)?;
    let decomposition = bell_decomposition(&strategy.state, tol)?;
    let w = state_operator(spec, &strategy.alice, &strategy.bob, &strategy.measurements)?;
    let scores: Vec<f64> = decomposition.vectors.iter().map(|v| v.dotc(&w.apply(v)).re).collect();
    let weighted_sum = scores.iter().zip(&decomposition.weights).map(|(s, q)| s * q).sum();
    let state_score = score_with_state_operator(&w, &strategy.state.matrix);
    Ok(BellDiagnostics { decomposition, scores, weighted_sum, state_score })
}
