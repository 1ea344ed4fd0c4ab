//! Dual certificates for the reduced relaxation and their independent check.
//!
//! For any feasible `(Δ_ρ, Δ_σ, q)` and any `Y^(l)`, `ν_z`,
//!
//! ```text
//! R = Σ_z ν_z + Σ_l ⟨Y^(l), K^(l)⟩ + Σ q(c̃|z) r(c̃,z) + Δ_ρ g_ρ + Δ_σ g_σ − Σ_l ⟨Y^(l), Ḡ^(l)⟩
//! ```
//!
//! with `K = d X_d + X_1 + X_{1/d}/d` and the residuals `r`, `g_ρ`, `g_σ` of
//! the dual equalities. Positivity of `Ḡ` bounds every entry by the square
//! root of its diagonal, so `|q| ≤ √d` and `|Δ_ρ|, |Δ_σ| ≤ 1`; a negative
//! eigenvalue of `Y^(l)` costs at most its magnitude times `tr Ḡ`. The
//! verifier adds these terms to the dual objective to get a bound that holds
//! regardless of solver accuracy.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::{block_diagonalize_with_seed, BlockDiagonalizer};
use super::reduced::{ReducedMomentModel, Symbol};
use super::solve::TransformedModel;
use crate::{Error, Result};

/// Largest accepted violation of a dual equality.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Smallest accepted eigenvalue of a dual block.
pub const PSD_TOL: f64 = 1e-9;
/// Largest accepted deviation of `TᵀT` from the identity.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    /// `r(c̃, z) = δ_{c̃0}/(d+1) + Σ_l ⟨Y^(l), X̃_q(c̃|z)⟩ − ν_z`, indexed `[z][c̃]`.
    pub q: Vec<Vec<f64>>,
    /// `Σ_l ⟨Y^(l), X̃_Δρ + X̃_{Δρ/d}/d⟩`.
    pub delta_rho: f64,
    /// `Σ_l ⟨Y^(l), d X̃_{dΔσ}⟩`.
    pub delta_sigma: f64,
}

impl CertificateResiduals {
    pub fn max_abs(&self) -> f64 {
        self.q.iter().flatten().chain([&self.delta_rho, &self.delta_sigma]).fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub d: usize,
    pub symmetrized: bool,
    /// Seed that rebuilds the block transform; `None` for the unreduced minor.
    pub seed: Option<u64>,
    pub block_sizes: Vec<usize>,
    /// `Y^(l)` as rows.
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub nu: Vec<f64>,
    pub objective: f64,
    pub residuals: CertificateResiduals,
}

impl DualCertificate {
    pub fn block_matrix(&self, l: usize) -> Result<DMatrix<f64>> {
        let rows = &self.blocks[l];
        let b = rows.len();
        if rows.iter().any(|r| r.len() != b) {
            return Err(Error::Certificate(format!("Y^({l}) is not square")));
        }
        Ok(DMatrix::from_fn(b, b, |i, j| rows[i][j]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) struct Evaluation {
    pub objective: f64,
    pub residuals: CertificateResiduals,
}

fn pairing(ys: &[DMatrix<f64>], mats: &[DMatrix<f64>]) -> f64 {
    ys.iter().zip(mats).map(|(y, x)| y.dot(x)).sum()
}

fn dense_blocks(cert: &DualCertificate, t: &TransformedModel) -> Result<Vec<DMatrix<f64>>> {
    if cert.blocks.len() != t.blocks.block_sizes.len() {
        return Err(Error::Certificate(format!(
            "certificate has {} blocks, the model has {}",
            cert.blocks.len(),
            t.blocks.block_sizes.len()
        )));
    }
    (0..cert.blocks.len())
        .map(|l| {
            let y = cert.block_matrix(l)?;
            if y.nrows() != t.blocks.block_sizes[l] {
                return Err(Error::Certificate(format!(
                    "Y^({l}) has size {}, expected {}",
                    y.nrows(),
                    t.blocks.block_sizes[l]
                )));
            }
            Ok(y)
        })
        .collect()
}

/// `ν_z = 1/(d+1) + Σ_l ⟨Y^(l), X̃_q(0|z)⟩`, which zeroes the `c̃ = 0` rows.
pub(crate) fn derive_nu(cert: &DualCertificate, t: &TransformedModel) -> Result<Vec<f64>> {
    let d = t.model.d;
    let ys = dense_blocks(cert, t)?;
    Ok((0..=d).map(|z| 1.0 / (d as f64 + 1.0) + pairing(&ys, t.symbol(Symbol::Q { miss: 0, z }))).collect())
}

/// Objective and residuals of the stored `Y^(l)` and `ν_z`.
pub(crate) fn evaluate_certificate(cert: &DualCertificate, t: &TransformedModel) -> Result<Evaluation> {
    let d = t.model.d;
    let df = d as f64;
    let ys = dense_blocks(cert, t)?;
    if cert.nu.len() != d + 1 {
        return Err(Error::Certificate(format!("expected {} multipliers ν_z, got {}", d + 1, cert.nu.len())));
    }
    let inner = |s: Symbol| pairing(&ys, t.symbol(s));
    let q = (0..=d)
        .map(|z| {
            (0..d)
                .map(|miss| {
                    let delta = if miss == 0 { 1.0 / (df + 1.0) } else { 0.0 };
                    delta + inner(Symbol::Q { miss, z }) - cert.nu[z]
                })
                .collect()
        })
        .collect();
    let residuals = CertificateResiduals {
        q,
        delta_rho: inner(Symbol::DeltaRho) + inner(Symbol::DeltaRhoOverD) / df,
        delta_sigma: df * inner(Symbol::DDeltaSigma),
    };
    let constant: f64 = t.constant_terms().iter().map(|&(s, c)| c * inner(s)).sum();
    Ok(Evaluation { objective: constant + cert.nu.iter().sum::<f64>(), residuals })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub d: usize,
    /// Dual objective recomputed from the certificate.
    pub objective: f64,
    /// Objective plus the worst-case contribution of every residual.
    pub certified_bound: f64,
    pub max_residual: f64,
    pub min_eigenvalues: Vec<f64>,
    pub orthogonality_error: f64,
    pub block_sizes: Vec<usize>,
}

/// Checks a certificate with fresh arithmetic: rebuilds the model and the
/// block transform, tests every `Y^(l)` for symmetry and positivity by
/// eigendecomposition, recomputes every dual equality and the objective, and
/// reports the certified upper bound.
pub fn verify_certificate(cert: &DualCertificate, d: usize) -> Result<VerificationReport> {
    if cert.d != d {
        return Err(Error::Certificate(format!("certificate is for d = {}, asked to verify d = {d}", cert.d)));
    }
    if !cert.symmetrized {
        return Err(Error::Unsupported { d, reason: "only certificates of the symmetrized minor can be verified".into() });
    }
    let model = ReducedMomentModel::new(d)?;
    let n = model.size;
    let blocks = match cert.seed {
        Some(seed) => block_diagonalize_with_seed(&model.structure, n, seed)
            .ok_or_else(|| Error::Certificate(format!("block transform for seed {seed} does not rebuild")))?,
        None => BlockDiagonalizer::identity(n),
    };
    if blocks.block_sizes != cert.block_sizes {
        return Err(Error::Certificate(format!(
            "block sizes {:?} do not match the rebuilt transform {:?}",
            cert.block_sizes, blocks.block_sizes
        )));
    }
    let tt = blocks.transform.transpose() * &blocks.transform;
    let orthogonality_error = (tt - DMatrix::<f64>::identity(n, n)).amax();
    if orthogonality_error > ORTHOGONALITY_TOL {
        return Err(Error::Certificate(format!("transform is not orthogonal: ‖TᵀT − I‖ = {orthogonality_error:.2e}")));
    }
    let t = TransformedModel::new(model, blocks);
    let ys = dense_blocks(cert, &t)?;

    let spectra: Vec<(f64, f64)> = ys
        .par_iter()
        .map(|y| {
            let asym = (y - y.transpose()).amax();
            let sym = (y + y.transpose()) * 0.5;
            let min = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            (asym, min)
        })
        .collect();
    for (l, &(asym, min)) in spectra.iter().enumerate() {
        if asym > 1e-12 * ys[l].amax().max(1.0) {
            return Err(Error::Certificate(format!("Y^({l}) is not symmetric (deviation {asym:.2e})")));
        }
        if min < -PSD_TOL {
            return Err(Error::Certificate(format!("Y^({l}) has eigenvalue {min:.3e} below −{PSD_TOL:e}")));
        }
    }

    let ev = evaluate_certificate(cert, &t)?;
    for (z, row) in ev.residuals.q.iter().enumerate() {
        for (miss, r) in row.iter().enumerate() {
            if r.abs() > EQUALITY_TOL {
                return Err(Error::Certificate(format!(
                    "dual equality for q(c̃={miss}|z={z}) violated by {r:.3e}"
                )));
            }
        }
    }
    if ev.residuals.delta_rho.abs() > EQUALITY_TOL {
        return Err(Error::Certificate(format!("Δ_ρ coupling violated by {:.3e}", ev.residuals.delta_rho)));
    }
    if ev.residuals.delta_sigma.abs() > EQUALITY_TOL {
        return Err(Error::Certificate(format!("Δ_σ coupling violated by {:.3e}", ev.residuals.delta_sigma)));
    }
    if (ev.objective - cert.objective).abs() > EQUALITY_TOL * ev.objective.abs().max(1.0) {
        return Err(Error::Certificate(format!(
            "stored objective {} differs from recomputed {}",
            cert.objective, ev.objective
        )));
    }

    let sqrt_d = (d as f64).sqrt();
    let q_slack: f64 = ev.residuals.q.iter().flatten().map(|r| r.abs()).sum::<f64>() * sqrt_d;
    let psd_slack: f64 = spectra.iter().map(|&(_, m)| (-m).max(0.0)).sum::<f64>() * t.model.trace();
    let certified_bound =
        ev.objective + q_slack + ev.residuals.delta_rho.abs() + ev.residuals.delta_sigma.abs() + psd_slack;

    Ok(VerificationReport {
        d,
        objective: ev.objective,
        certified_bound,
        max_residual: ev.residuals.max_abs(),
        min_eigenvalues: spectra.iter().map(|s| s.1).collect(),
        orthogonality_error,
        block_sizes: cert.block_sizes.clone(),
    })
}
