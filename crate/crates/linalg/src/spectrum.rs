use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{ComplexMatrix, LinalgError, Result, HERMITIAN_TOL};

/// Relative tolerance used when grouping degenerate eigenvalues.
pub const MULTIPLICITY_TOL: f64 = 1e-8;

/// Eigendecomposition of a Hermitian matrix, eigenvalues non-increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct RealSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Groups sorted eigenvalues into `(value, multiplicity)` pairs. Two neighbours
/// belong to the same group when they differ by at most `rel_tol` times the
/// spectral radius.
pub fn group_eigenvalues(values: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale;
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for &v in values {
        match groups.last_mut() {
            Some((first, count, sum)) if (v - *first).abs() <= tol => {
                *count += 1;
                *sum += v;
            }
            _ => groups.push((v, 1, v)),
        }
    }
    groups.into_iter().map(|(_, count, sum)| (sum / count as f64, count)).collect()
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Number of eigenvalues with magnitude above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|v| v.abs() > tol).count()
    }

    /// Distinct eigenvalues with multiplicities, grouped at [`MULTIPLICITY_TOL`].
    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        group_eigenvalues(&self.eigenvalues, MULTIPLICITY_TOL)
    }

    pub fn eigenvector(&self, k: usize) -> crate::Ket {
        self.eigenvectors.as_inner().column(k).into_owned()
    }

    /// `Σ λ_k v_k v_k†`
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = self.eigenvectors.as_inner();
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)] * self.eigenvalues[k]);
        ComplexMatrix::from(scaled * v.adjoint())
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Hermitian eigendecomposition (Householder tridiagonalization followed by
/// implicit QL sweeps).
pub fn eigh(h: &ComplexMatrix) -> Result<HermitianSpectrum> {
    if !h.is_square() {
        return Err(LinalgError::NotSquare { rows: h.rows(), cols: h.cols() });
    }
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let n = h.rows();
    if n == 0 {
        return Ok(HermitianSpectrum { eigenvalues: vec![], eigenvectors: ComplexMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::new(h.hermitian_part().into_inner());
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    let vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(HermitianSpectrum {
        eigenvalues: order.iter().map(|&k| values[k]).collect(),
        eigenvectors: ComplexMatrix::from(vectors),
    })
}

/// Eigendecomposition of a real symmetric matrix. Only the lower triangle is
/// trusted; the input is symmetrized first.
pub fn real_symmetric_eigh(m: &DMatrix<f64>) -> RealSpectrum {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "real_symmetric_eigh needs a square matrix");
    if n == 0 {
        return RealSpectrum { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0) };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    RealSpectrum {
        eigenvalues: order.iter().map(|&k| values[k]).collect(),
        eigenvectors: DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]),
    }
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    m.as_inner().clone().singular_values().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn diagonal_spectrum_sorted() {
        let s = eigh(&ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 0.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![2.0, 1.0, 0.0]);
        assert!((&s.reconstruct() - &ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 0.0])).max_abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(eigh(&m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn grouping_merges_near_ties() {
        let groups = group_eigenvalues(&[0.5, 0.5 + 1e-12, 0.2, 0.0, -1e-15], MULTIPLICITY_TOL);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].1, 2);
        assert_eq!(groups[2].1, 2);
    }

    #[test]
    fn trace_norm_of_signed_diagonal() {
        assert!((trace_norm(&ComplexMatrix::from_real_diagonal(&[1.0, -2.0])) - 3.0).abs() < 1e-14);
    }
}
