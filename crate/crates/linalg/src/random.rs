use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{ComplexMatrix, Ket};

/// Haar-random `d × d` unitary, deterministic in `seed`.
pub fn random_unitary(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_with(d, &mut rng)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unitary drawn from a caller-supplied generator.
///
/// QR of a complex Ginibre matrix, then each column of Q is multiplied by the
/// phase of the matching diagonal entry of R so that R has a positive real
/// diagonal. Without that fix the distribution is not Haar.
pub fn random_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    assert!(d >= 1, "random_unitary needs d >= 1");
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    ComplexMatrix::from(q)
}

/// Uniformly random unit vector in `C^d`.
pub fn unit_ket_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Ket {
    let v = Ket::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = random_unitary(4, 17);
        let b = random_unitary(4, 17);
        assert_eq!(a.to_row_major(), b.to_row_major());
        assert_ne!(a.to_row_major(), random_unitary(4, 18).to_row_major());
    }

    #[test]
    fn unitary_for_many_seeds() {
        for seed in 0..100 {
            let u = random_unitary(5, seed);
            let err = (&(&u * &u.adjoint()) - &ComplexMatrix::identity(5)).max_abs();
            assert!(err < 1e-12, "seed {seed}: {err}");
        }
    }
}
