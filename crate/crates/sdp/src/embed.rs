use boundent_linalg::{Complex64, ComplexMatrix, LinalgError, HERMITIAN_TOL};
use nalgebra::DMatrix;

use crate::SparseSym;

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian `H`.
///
/// `H ⪰ 0` iff the embedding is PSD, each eigenvalue of `H` appears twice, and
/// `⟨embed(A), embed(B)⟩ = 2 Re tr(AB)`.
pub fn embed_complex(h: &ComplexMatrix) -> Result<DMatrix<f64>, LinalgError> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let n = h.rows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Sparse form of [`embed_complex`] for a Hermitian matrix given by its
/// nonzero upper-triangular entries `(i, j, h_ij)`, `i <= j`.
pub fn embed_hermitian_entries(n: usize, upper: &[(usize, usize, Complex64)]) -> SparseSym {
    let mut t = Vec::with_capacity(4 * upper.len());
    for &(i, j, z) in upper {
        debug_assert!(i <= j);
        if z.re != 0.0 {
            t.push((i, j, z.re));
            t.push((i + n, j + n, z.re));
        }
        if z.im != 0.0 && i != j {
            // block (0,1) holds -Im H, block (1,0) holds Im H
            t.push((i, j + n, -z.im));
            t.push((j, i + n, z.im));
        }
    }
    SparseSym::from_triplets(t)
}

/// Sparse embedding of a dense Hermitian matrix, skipping entries with
/// magnitude at most `drop_tol`.
pub fn embed_sparse(h: &ComplexMatrix, drop_tol: f64) -> SparseSym {
    let n = h.rows();
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i..n {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            let z = Complex64::new(
                if z.re.abs() > drop_tol { z.re } else { 0.0 },
                if z.im.abs() > drop_tol { z.im } else { 0.0 },
            );
            if z.re != 0.0 || z.im != 0.0 {
                upper.push((i, j, z));
            }
        }
    }
    embed_hermitian_entries(n, &upper)
}

/// Hermitian matrix `M` with `⟨embed(A), X⟩ = 2 Re tr(A M)` for every
/// Hermitian `A`. `M ⪰ 0` whenever `X ⪰ 0`.
pub fn complexify(x: &DMatrix<f64>) -> ComplexMatrix {
    let n = x.nrows() / 2;
    ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        Complex64::new(re, im)
    })
    .hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_embeds_to_identity() {
        assert_eq!(embed_complex(&ComplexMatrix::identity(3)).unwrap(), DMatrix::identity(6, 6));
    }

    #[test]
    fn sparse_and_dense_embeddings_agree() {
        let h = ComplexMatrix::from_fn(3, 3, |i, j| {
            let base = Complex64::new((i + j) as f64, i as f64 - j as f64);
            if i == j {
                Complex64::new(base.re, 0.0)
            } else {
                base
            }
        });
        let dense = embed_complex(&h).unwrap();
        assert_eq!(embed_sparse(&h, 0.0).to_dense(6), dense);
        assert!((&complexify(&dense) - &h).max_abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = ComplexMatrix::identity(2);
        h[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(embed_complex(&h).is_err());
    }
}
