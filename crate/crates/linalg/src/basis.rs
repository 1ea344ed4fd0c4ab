use num_complex::Complex64;

use crate::ComplexMatrix;

/// Orthonormal basis of `d × d` Hermitian matrices under `tr(AB)`.
///
/// Order: `I/√d`, then for every pair `j < k` the symmetric and antisymmetric
/// off-diagonal generalized Gell-Mann matrices, then the `d - 1` diagonal ones.
/// All are scaled to unit Hilbert–Schmidt norm.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    assert!(d >= 1, "hermitian_basis needs d >= 1");
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(d * d);
    let s = (d as f64).sqrt().recip();
    out.push(ComplexMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(s, 0.0) } else { zero }));

    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = ComplexMatrix::zeros(d, d);
            sym[(j, k)] = Complex64::new(h, 0.0);
            sym[(k, j)] = Complex64::new(h, 0.0);
            out.push(sym);
            let mut anti = ComplexMatrix::zeros(d, d);
            anti[(j, k)] = Complex64::new(0.0, -h);
            anti[(k, j)] = Complex64::new(0.0, h);
            out.push(anti);
        }
    }

    for l in 1..d {
        // diag(1, ..., 1, -l, 0, ...) with l ones
        let norm = ((l * (l + 1)) as f64).sqrt().recip();
        let mut diag = vec![0.0; d];
        for v in diag.iter_mut().take(l) {
            *v = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(ComplexMatrix::from_real_diagonal(&diag));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matrix_is_identity() {
        for d in 1..=5 {
            let basis = hermitian_basis(d);
            assert_eq!(basis.len(), d * d);
            for (i, a) in basis.iter().enumerate() {
                assert!(a.hermitian_deviation() < 1e-14);
                for (j, b) in basis.iter().enumerate() {
                    let g = a.trace_product(b);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g - Complex64::new(expected, 0.0)).norm() < 1e-14, "d={d} ({i},{j}) {g}");
                }
            }
        }
    }
}
