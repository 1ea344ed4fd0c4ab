//! Alternating optimization over PPT states and measurements.
//!
//! With the measurements fixed, the score is linear in the shared state and
//! maximizing it over PPT states is an SDP. With the state fixed, each of the
//! `d+1` measurements can be optimized separately. Alternating the two never
//! decreases the score; the search is restarted from random product
//! measurements and the best local optimum is kept.

use std::path::Path;

use boundent_linalg::{eigh, partial_transpose, random_unitary_with, Complex64, ComplexMatrix, Ket, Subsystem};
use boundent_sdp::{
    complexify, embed_hermitian_entries, embed_sparse, solve, BlockSpec, ConicProgram, Sense, SolverOptions, SparseSym,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::{measurement_operators, noise_threshold, score_quantum, state_operator, GameSpec, QuantumStrategy};
use crate::qobjects::{encoding_unitaries, product_measurement, DensityMatrix, Povm, UnitaryFamily};
use crate::error::check_solution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub d: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_rounds: usize,
    /// Stop when a full round improves the score by less than this.
    pub conv_tol: f64,
    /// Gap and feasibility tolerance of every SDP.
    pub solver_tol: f64,
}

impl SeesawConfig {
    /// Defaults: 50 restarts for `d ≤ 5`, 20 above; 200 rounds; `1e-8`
    /// convergence; `1e-9` solver tolerance.
    pub fn new(d: usize) -> Self {
        SeesawConfig {
            d,
            restarts: if d <= 5 { 50 } else { 20 },
            seed: 0,
            max_rounds: 200,
            conv_tol: 1e-8,
            solver_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GameSpec::new(self.d)?;
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("at least one restart is needed".into()));
        }
        if !(self.conv_tol > 0.0) || !(self.solver_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Values of one restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    /// Score of the initial measurements with the first optimized state, then
    /// the score after every following half-step.
    pub values: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
    /// Why the restart stopped early, if it did.
    pub failure: Option<String>,
}

impl RestartTrace {
    pub fn best(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeesawResult {
    pub config: SeesawConfig,
    pub best_value: f64,
    pub best_restart: usize,
    pub state: DensityMatrix,
    pub measurements: Vec<Povm>,
    pub rounds: usize,
    /// Value trace of the best restart.
    pub trace: Vec<f64>,
    pub restarts: Vec<RestartTrace>,
}

impl SeesawResult {
    pub fn strategy(&self) -> QuantumStrategy {
        let d = self.config.d;
        QuantumStrategy {
            state: self.state.clone(),
            alice: encoding_unitaries(d),
            bob: encoding_unitaries(d),
            measurements: self.measurements.clone(),
        }
    }

    /// Largest isotropic noise rate at which the best strategy still beats
    /// the classical bound.
    pub fn noise_tolerance(&self) -> Result<f64> {
        let spec = GameSpec::new(self.config.d)?;
        noise_threshold(&spec, &self.strategy(), spec.bound())
    }
}

/// Sparse Hermitian matrix given by its upper-triangular entries.
type SparseHermitian = Vec<(usize, usize, Complex64)>;

/// A basis of the traceless Hermitian `n × n` matrices with at most two
/// nonzero entries each: `E_jk + E_kj`, `i(E_jk − E_kj)` for `j < k`, and
/// `E_jj − E_{j+1,j+1}`.
fn traceless_basis(n: usize) -> Vec<SparseHermitian> {
    let one = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in j + 1..n {
            out.push(vec![(j, k, one)]);
            out.push(vec![(j, k, Complex64::new(0.0, 1.0))]);
        }
    }
    for j in 0..n.saturating_sub(1) {
        out.push(vec![(j, j, one), (j + 1, j + 1, -one)]);
    }
    out
}

/// Hermitian basis of all `n × n` matrices: the traceless basis plus `E_00`.
fn full_basis(n: usize) -> Vec<SparseHermitian> {
    let mut b = traceless_basis(n);
    b.push(vec![(0, 0, Complex64::new(1.0, 0.0))]);
    b
}

/// Partial transpose on the first factor of a sparse Hermitian matrix.
fn sparse_partial_transpose(h: &SparseHermitian, d: usize) -> SparseHermitian {
    let mut out = Vec::with_capacity(h.len());
    for &(i, j, v) in h {
        let (a, b, a2, b2) = (i / d, i % d, j / d, j % d);
        let (r, c) = (a2 * d + b, a * d + b2);
        if r <= c {
            out.push((r, c, v));
        } else {
            out.push((c, r, v.conj()));
        }
    }
    out
}

fn to_dense(h: &SparseHermitian, n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for &(i, j, v) in h {
        m[(i, j)] += v;
        if i != j {
            m[(j, i)] += v.conj();
        }
    }
    m
}

/// `tr(W H)` for Hermitian `W` and sparse Hermitian `H`.
fn trace_with(w: &ComplexMatrix, h: &SparseHermitian) -> f64 {
    h.iter()
        .map(|&(i, j, v)| if i == j { (w[(i, i)] * v).re } else { 2.0 * (w[(j, i)] * v).re })
        .sum()
}

/// Mixes in just enough of the identity to make both `ψ` and `ψ^{T_A}`
/// positive semidefinite, then normalizes.
fn repair_ppt(psi: &ComplexMatrix, d: usize) -> Result<DensityMatrix> {
    let h = psi.hermitian_part();
    let pt = partial_transpose(&h, d, d, Subsystem::A)?;
    let shift = (-eigh(&h)?.min()).max(-eigh(&pt)?.min()).max(0.0);
    let n = d * d;
    let lifted = &h + &ComplexMatrix::identity(n).scale(shift);
    let tr = lifted.trace().re;
    DensityMatrix::new(lifted.scale(1.0 / tr).hermitian_part(), d, d)
}

/// Best PPT state for fixed encodings and measurements.
///
/// The state is parametrized as `ψ(y) = I/n + Σ_k y_k H_k` over a traceless
/// basis, so unit trace holds exactly; positivity of `ψ` and of its partial
/// transpose are the two blocks of the dual slack.
pub fn optimize_state(
    spec: &GameSpec,
    measurements: &[Povm],
    alice: &UnitaryFamily,
    bob: &UnitaryFamily,
    tol: f64,
) -> Result<(DensityMatrix, f64)> {
    let d = spec.d;
    let n = d * d;
    let w = state_operator(spec, alice, bob, measurements)?;
    let basis = traceless_basis(n);

    let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(2 * n), BlockSpec::psd(2 * n)]);
    let c = SparseSym::identity(2 * n).scaled(1.0 / n as f64);
    p.set_objective(0, c.clone());
    p.set_objective(1, c);
    for h in &basis {
        let direct = embed_hermitian_entries(n, h).scaled(-1.0);
        let pt = embed_hermitian_entries(n, &sparse_partial_transpose(h, d)).scaled(-1.0);
        p.add_constraint(vec![(0, direct), (1, pt)], trace_with(&w, h));
    }
    let sol = solve(&p, &SolverOptions::with_tol(tol))?;
    check_solution(&sol, tol, "state optimization")?;

    let mut psi = ComplexMatrix::identity(n).scale(1.0 / n as f64);
    for (h, &y) in basis.iter().zip(&sol.y) {
        for &(i, j, v) in h {
            psi[(i, j)] += v * y;
            if i != j {
                psi[(j, i)] += v.conj() * y;
            }
        }
    }
    let state = repair_ppt(&psi, d)?;
    let value = state.matrix.trace_product(&w).re;
    Ok((state, value))
}

/// Best measurements for a fixed state; the `d+1` inputs are independent
/// programs.
pub fn optimize_measurements(
    spec: &GameSpec,
    state: &DensityMatrix,
    alice: &UnitaryFamily,
    bob: &UnitaryFamily,
    tol: f64,
) -> Result<(Vec<Povm>, f64)> {
    let d = spec.d;
    let n = d * d;
    let ops = measurement_operators(spec, alice, bob, state)?;
    let basis = full_basis(n);
    let embedded: Vec<(SparseSym, f64)> = basis
        .iter()
        .map(|h| (embed_hermitian_entries(n, h), 2.0 * to_dense(h, n).trace().re))
        .collect();

    let per_z: Vec<Result<(Povm, f64)>> = ops
        .par_iter()
        .enumerate()
        .map(|(z, b)| {
            let mut p = ConicProgram::new(Sense::Maximize, vec![BlockSpec::psd(2 * n); d]);
            for (c, bc) in b.iter().enumerate() {
                p.set_objective(c, embed_sparse(bc, 0.0).scaled(0.5));
            }
            for (g, rhs) in &embedded {
                p.add_constraint((0..d).map(|c| (c, g.clone())).collect(), *rhs);
            }
            let sol = solve(&p, &SolverOptions::with_tol(tol))?;
            check_solution(&sol, tol, &format!("measurement {z}"))?;
            let effects: Vec<ComplexMatrix> = sol.x.iter().map(complexify).collect();
            let povm = Povm::from_approximate(z, &effects)?;
            let value = b.iter().zip(&povm.effects).map(|(bc, e)| bc.trace_product(e).re).sum::<f64>();
            Ok((povm, value))
        })
        .collect();
    let mut povms = Vec::with_capacity(d + 1);
    let mut value = 0.0;
    for r in per_z {
        let (m, v) = r?;
        povms.push(m);
        value += v;
    }
    Ok((povms, value))
}

fn basis_columns(u: &ComplexMatrix) -> Vec<Ket> {
    (0..u.cols()).map(|k| u.as_inner().column(k).into_owned()).collect()
}

/// Product measurements `Σ_b P_b ⊗ Q_{b−c}` from Haar-random local bases.
pub fn random_product_measurements(d: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Povm>> {
    (0..=d)
        .map(|z| {
            let first = basis_columns(&random_unitary_with(d, rng));
            let second = basis_columns(&random_unitary_with(d, rng));
            product_measurement(z, &first, &second)
        })
        .collect()
}

struct RestartOutcome {
    trace: RestartTrace,
    best: Option<(f64, DensityMatrix, Vec<Povm>)>,
}

fn run_restart(spec: &GameSpec, config: &SeesawConfig, restart: usize) -> RestartOutcome {
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let alice = encoding_unitaries(d);
    let bob = encoding_unitaries(d);
    let mut trace = RestartTrace { restart, values: Vec::new(), rounds: 0, converged: false, failure: None };
    let mut best: Option<(f64, DensityMatrix, Vec<Povm>)> = None;

    let mut measurements = match random_product_measurements(d, &mut rng) {
        Ok(m) => m,
        Err(e) => {
            trace.failure = Some(e.to_string());
            return RestartOutcome { trace, best };
        }
    };
    let mut last = f64::NEG_INFINITY;
    for round in 0..config.max_rounds {
        let step = optimize_state(spec, &measurements, &alice, &bob, config.solver_tol).and_then(|(state, v1)| {
            let (m, v2) = optimize_measurements(spec, &state, &alice, &bob, config.solver_tol)?;
            Ok((state, v1, m, v2))
        });
        let (state, v1, m, v2) = match step {
            Ok(s) => s,
            Err(e) => {
                trace.failure = Some(e.to_string());
                break;
            }
        };
        trace.values.push(v1);
        trace.values.push(v2);
        trace.rounds = round + 1;
        measurements = m;
        if best.as_ref().is_none_or(|b| v2 > b.0) {
            best = Some((v2, state, measurements.clone()));
        }
        if (v2 - last).abs() < config.conv_tol {
            trace.converged = true;
            break;
        }
        last = v2;
    }
    RestartOutcome { trace, best }
}

/// Runs all restarts and keeps the best strategy (ties go to the lower
/// restart index).
pub fn seesaw(config: &SeesawConfig) -> Result<SeesawResult> {
    config.validate()?;
    let spec = GameSpec::new(config.d)?;
    let outcomes: Vec<RestartOutcome> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(&spec, config, r)).collect();

    let mut chosen: Option<(usize, &(f64, DensityMatrix, Vec<Povm>))> = None;
    for (r, o) in outcomes.iter().enumerate() {
        if let Some(b) = &o.best {
            if chosen.is_none_or(|(_, c)| b.0 > c.0) {
                chosen = Some((r, b));
            }
        }
    }
    let Some((best_restart, (best_value, state, measurements))) = chosen else {
        let reasons: Vec<String> = outcomes.iter().filter_map(|o| o.trace.failure.clone()).collect();
        return Err(Error::Solver(format!("every restart failed: {}", reasons.join("; "))));
    };
    let trace = outcomes[best_restart].trace.clone();
    Ok(SeesawResult {
        config: config.clone(),
        best_value: *best_value,
        best_restart,
        state: state.clone(),
        measurements: measurements.clone(),
        rounds: trace.rounds,
        trace: trace.values.clone(),
        restarts: outcomes.into_iter().map(|o| o.trace).collect(),
    })
}

/// Manifest of a strategy bundle directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub d: usize,
    pub value: f64,
    pub encodings: String,
    pub state: String,
    pub measurements: Vec<String>,
}

/// Writes `manifest.json`, `state.json` and one `povm_<z>.json` per input.
pub fn write_bundle(dir: &Path, d: usize, value: f64, state: &DensityMatrix, measurements: &[Povm]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("state.json"), serde_json::to_string_pretty(state)?)?;
    let mut names = Vec::with_capacity(measurements.len());
    for m in measurements {
        let name = format!("povm_{}.json", m.input);
        std::fs::write(dir.join(&name), serde_json::to_string_pretty(m)?)?;
        names.push(name);
    }
    let manifest = BundleManifest {
        d,
        value,
        encodings: "weyl-heisenberg".into(),
        state: "state.json".into(),
        measurements: names,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a bundle written by [`write_bundle`] and checks that the stored
/// value is reproduced.
pub fn read_bundle(dir: &Path) -> Result<(BundleManifest, QuantumStrategy)> {
    let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.encodings != "weyl-heisenberg" {
        return Err(Error::InvalidArgument(format!("unknown encodings '{}'", manifest.encodings)));
    }
    let state: DensityMatrix = serde_json::from_str(&std::fs::read_to_string(dir.join(&manifest.state))?)?;
    let state = DensityMatrix::new(state.matrix, state.dim_a, state.dim_b)?;
    let measurements = manifest
        .measurements
        .iter()
        .map(|name| {
            let m: Povm = serde_json::from_str(&std::fs::read_to_string(dir.join(name))?)?;
            Povm::new(m.input, m.effects)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = manifest.d;
    let strategy = QuantumStrategy { state, alice: encoding_unitaries(d), bob: encoding_unitaries(d), measurements };
    let spec = GameSpec::new(d)?;
    strategy.validate(&spec)?;
    let value = score_quantum(&spec, &strategy)?;
    if (value - manifest.value).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "bundle records value {} but the strategy scores {value}",
            manifest.value
        )));
    }
    Ok((manifest, strategy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traceless_basis_spans_the_traceless_space() {
        let n = 4;
        let b = traceless_basis(n);
        assert_eq!(b.len(), n * n - 1);
        // Gram matrix of the real coordinates has full rank
        let coords: Vec<Vec<f64>> = b
            .iter()
            .map(|h| {
                let m = to_dense(h, n);
                assert!(m.trace().norm() < 1e-15);
                m.to_row_major().iter().flat_map(|z| [z.re, z.im]).collect()
            })
            .collect();
        let g = nalgebra::DMatrix::from_fn(coords.len(), coords.len(), |i, j| {
            coords[i].iter().zip(&coords[j]).map(|(a, b)| a * b).sum::<f64>()
        });
        let ev = g.symmetric_eigenvalues();
        assert!(ev.iter().all(|&v| v > 1e-9));
    }

    #[test]
    fn sparse_partial_transpose_matches_dense() {
        let d = 3;
        for h in full_basis(d * d) {
            let dense = partial_transpose(&to_dense(&h, d * d), d, d, Subsystem::A).unwrap();
            let sparse = to_dense(&sparse_partial_transpose(&h, d), d * d);
            assert!((&dense - &sparse).max_abs() < 1e-15);
        }
    }

    #[test]
    fn trace_with_matches_dense_product() {
        let n = 4;
        let w = ComplexMatrix::from_fn(n, n, |i, j| Complex64::new((i + 2 * j) as f64, i as f64 - j as f64))
            .hermitian_part();
        for h in full_basis(n) {
            assert!((trace_with(&w, &h) - w.trace_product(&to_dense(&h, n)).re).abs() < 1e-12);
        }
    }
}
