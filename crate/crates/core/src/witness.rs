//! PPT test and the realignment (CCNR) criterion.

use boundent_linalg::{eigh, partial_transpose, realignment_matrix, trace_norm, Subsystem};
use serde::{Deserialize, Serialize};

use crate::qobjects::DensityMatrix;
use crate::Result;

/// Default absolute tolerance on partial-transpose eigenvalues.
pub const PPT_TOL: f64 = 1e-9;
/// Margin above 1 required before the realignment norm counts as a witness.
pub const CCNR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub ppt: bool,
    pub min_pt_eigenvalue: f64,
    pub ccnr_value: f64,
    pub entangled_by_ccnr: bool,
}

/// Whether every eigenvalue of `ρ^{T_A}` is at least `-tol`, together with
/// the smallest eigenvalue.
pub fn is_ppt(rho: &DensityMatrix, tol: f64) -> Result<(bool, f64)> {
    let pt = partial_transpose(&rho.matrix, rho.dim_a, rho.dim_b, Subsystem::A)?;
    let min = eigh(&pt)?.min();
    Ok((min >= -tol, min))
}

/// Trace norm of the realignment matrix; at most 1 for separable states.
pub fn ccnr(rho: &DensityMatrix) -> Result<f64> {
    Ok(trace_norm(&realignment_matrix(&rho.matrix, rho.dim_a, rho.dim_b)?))
}

pub fn witness_report(rho: &DensityMatrix) -> Result<WitnessReport> {
    let (ppt, min_pt_eigenvalue) = is_ppt(rho, PPT_TOL)?;
    let ccnr_value = ccnr(rho)?;
    Ok(WitnessReport { ppt, min_pt_eigenvalue, ccnr_value, entangled_by_ccnr: ccnr_value > 1.0 + CCNR_TOL })
}
