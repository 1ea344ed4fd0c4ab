use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{hermitian_basis, ComplexMatrix, LinalgError, Result};

/// Tensor factor of a bipartite system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from(a.as_inner().kronecker(b.as_inner()))
}

fn check_bipartite(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<()> {
    let n = dim_a * dim_b;
    if m.rows() != n || m.cols() != n {
        return Err(LinalgError::dims(
            format!("{n}x{n} ({dim_a}x{dim_b} bipartite)"),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(())
}

/// Transposes the chosen tensor factor. Row index of the joint space is
/// `a * dim_b + b`.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    subsystem: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for a in 0..dim_a {
        for b in 0..dim_b {
            for a2 in 0..dim_a {
                for b2 in 0..dim_b {
                    let v = m[(a * dim_b + b, a2 * dim_b + b2)];
                    let (r, c) = match subsystem {
                        Subsystem::A => (a2 * dim_b + b, a * dim_b + b2),
                        Subsystem::B => (a * dim_b + b2, a2 * dim_b + b),
                    };
                    out[(r, c)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Traces out the chosen factor and returns the reduced operator on the other.
pub fn partial_trace(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    traced: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    let out = match traced {
        Subsystem::A => ComplexMatrix::from_fn(dim_b, dim_b, |b, b2| {
            (0..dim_a).map(|a| m[(a * dim_b + b, a * dim_b + b2)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(dim_a, dim_a, |a, a2| {
            (0..dim_b).map(|b| m[(a * dim_b + b, a2 * dim_b + b)]).sum()
        }),
    };
    Ok(out)
}

/// Correlation matrix `C_jk = tr((γ_j ⊗ γ_k) ρ)` over the orthonormal Hermitian
/// bases of both factors (see [`hermitian_basis`]). Entries are real for
/// Hermitian `rho`; the imaginary parts are dropped.
pub fn realignment_matrix(rho: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    check_bipartite(rho, dim_a, dim_b)?;
    let basis_a = hermitian_basis(dim_a);
    let basis_b = hermitian_basis(dim_b);
    let mut c = DMatrix::<f64>::zeros(dim_a * dim_a, dim_b * dim_b);
    for (j, ga) in basis_a.iter().enumerate() {
        // tr_A((γ_j ⊗ 1) ρ), a dim_b × dim_b operator
        let reduced = ComplexMatrix::from_fn(dim_b, dim_b, |b, b2| {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..dim_a {
                for a2 in 0..dim_a {
                    let g = ga[(a, a2)];
                    if g != Complex64::new(0.0, 0.0) {
                        acc += g * rho[(a2 * dim_b + b, a * dim_b + b2)];
                    }
                }
            }
            acc
        });
        for (k, gb) in basis_b.iter().enumerate() {
            c[(j, k)] = gb.trace_product(&reduced).re;
        }
    }
    Ok(ComplexMatrix::from_real(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn kron_of_diagonals() {
        let a = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        let b = ComplexMatrix::from_real_diagonal(&[3.0, 4.0]);
        assert_eq!(kron(&a, &b), ComplexMatrix::from_real_diagonal(&[3.0, 4.0, 6.0, 8.0]));
        assert_eq!(kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)), ComplexMatrix::identity(4));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = ComplexMatrix::from_real_diagonal(&[0.25, 0.75]);
        let b = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { re(1.0 / 3.0) } else { re(0.0) });
        let ab = kron(&a, &b);
        let ra = partial_trace(&ab, 2, 3, Subsystem::B).unwrap();
        let rb = partial_trace(&ab, 2, 3, Subsystem::A).unwrap();
        assert!((&ra - &a).max_abs() < 1e-15);
        assert!((&rb - &b).max_abs() < 1e-15);
    }

    #[test]
    fn partial_transpose_rejects_wrong_size() {
        let m = ComplexMatrix::identity(5);
        assert!(matches!(
            partial_transpose(&m, 2, 3, Subsystem::A),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_transposes_compose_to_full_transpose() {
        let m = ComplexMatrix::from_fn(6, 6, |i, j| Complex64::new((i * 7 + j) as f64, (i as f64) - (j as f64) * 0.5));
        let ta = partial_transpose(&m, 2, 3, Subsystem::A).unwrap();
        let tab = partial_transpose(&ta, 2, 3, Subsystem::B).unwrap();
        assert_eq!(tab, m.transpose());
    }
}
