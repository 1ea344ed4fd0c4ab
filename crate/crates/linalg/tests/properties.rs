use boundent_linalg::{
    eigh, hermitian_basis, kron, partial_trace, partial_transpose, random_unitary, random_unitary_with,
    realignment_matrix, trace_norm, unit_ket_with, Complex64, ComplexMatrix, Ket, Subsystem,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    use rand::Rng;
    ComplexMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    random_matrix(n, rng).hermitian_part()
}

fn max_entangled(d: usize) -> Ket {
    let s = 1.0 / (d as f64).sqrt();
    Ket::from_fn(d * d, |i, _| if i % (d + 1) == 0 { c(s, 0.0) } else { c(0.0, 0.0) })
}

fn basis_ket(d: usize, k: usize) -> Ket {
    Ket::from_fn(d, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

#[test]
fn shift_on_first_factor_moves_only_that_factor() {
    let shift = ComplexMatrix::from_fn(3, 3, |i, j| if i == (j + 1) % 3 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let op = kron(&shift, &ComplexMatrix::identity(3));
    let input = basis_ket(3, 0).kronecker(&basis_ket(3, 0));
    let out = op.apply(&input);
    // |1⟩⊗|0⟩ sits at joint index 1·3 + 0
    for i in 0..9 {
        let expected = if i == 3 { 1.0 } else { 0.0 };
        assert!((out[i] - c(expected, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn partial_transpose_of_max_entangled_state() {
    let phi = ComplexMatrix::projector(&max_entangled(3));
    let spec = eigh(&partial_transpose(&phi, 3, 3, Subsystem::A).unwrap()).unwrap();
    for (k, v) in spec.eigenvalues.iter().enumerate() {
        let expected = if k < 6 { 1.0 / 3.0 } else { -1.0 / 3.0 };
        assert!((v - expected).abs() < 1e-12, "{k}: {v}");
    }
}

#[test]
fn partial_transpose_fixes_maximally_mixed_state() {
    let m = ComplexMatrix::identity(9).scale(1.0 / 9.0);
    assert_eq!(partial_transpose(&m, 3, 3, Subsystem::A).unwrap(), m);
}

#[test]
fn realignment_of_maximally_mixed_state() {
    let m = ComplexMatrix::identity(9).scale(1.0 / 9.0);
    let r = realignment_matrix(&m, 3, 3).unwrap();
    assert_eq!((r.rows(), r.cols()), (9, 9));
    // only the (I/√3)⊗(I/√3) correlation survives, with value 9/(9·3)
    assert!((trace_norm(&r) - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn realignment_of_max_entangled_state() {
    let phi = ComplexMatrix::projector(&max_entangled(3));
    assert!((trace_norm(&realignment_matrix(&phi, 3, 3).unwrap()) - 3.0).abs() < 1e-12);
}

#[test]
fn realignment_of_product_pure_states_has_unit_trace_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (da, db) in [(2, 2), (3, 3), (2, 3), (3, 3), (4, 2)].into_iter().cycle().take(20) {
        let a = unit_ket_with(da, &mut rng);
        let b = unit_ket_with(db, &mut rng);
        let rho = kron(&ComplexMatrix::projector(&a), &ComplexMatrix::projector(&b));
        let tn = trace_norm(&realignment_matrix(&rho, da, db).unwrap());
        assert!((tn - 1.0).abs() < 1e-12, "{da}x{db}: {tn}");
    }
}

#[test]
fn eigh_recovers_conjugated_diagonal() {
    let d = [2.5, -1.0, 0.75, 0.0, 3.0, 1e-3];
    let u = random_unitary(6, 91);
    let m = ComplexMatrix::from_real_diagonal(&d).conjugate_by(&u);
    let spec = eigh(&m).unwrap();
    let mut sorted = d.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (got, want) in spec.eigenvalues.iter().zip(&sorted) {
        assert!((got - want).abs() < 1e-10);
    }
}

#[test]
fn haar_marginal_of_corner_entry() {
    let d = 4;
    let samples = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let values: Vec<f64> = (0..samples).map(|_| random_unitary_with(d, &mut rng)[(0, 0)].norm_sqr()).collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let stderr = (var / samples as f64).sqrt();
    assert!((mean - 1.0 / d as f64).abs() < 5.0 * stderr, "mean {mean}, stderr {stderr}");
}

#[test]
fn hermitian_basis_expansion_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in 1..=6 {
        let basis = hermitian_basis(d);
        let m = random_hermitian(d, &mut rng);
        let mut rebuilt = ComplexMatrix::zeros(d, d);
        for g in &basis {
            rebuilt += &g.scale(g.trace_product(&m).re);
        }
        assert!((&rebuilt - &m).max_abs() < 1e-12);
    }
}

#[test]
fn eigh_reconstruction_on_random_hermitian_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..100 {
        let n = 1 + (k * 37) % 100;
        let m = random_hermitian(n, &mut rng);
        let spec = eigh(&m).unwrap();
        let scale = m.max_abs().max(1.0);
        assert!((&spec.reconstruct() - &m).max_abs() <= 1e-10 * scale, "n={n}");
        let v = &spec.eigenvectors;
        assert!((&(&v.adjoint() * v) - &ComplexMatrix::identity(n)).max_abs() <= 1e-10, "n={n}");
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

fn seed_strategy() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn partial_transpose_is_trace_preserving_involution(seed in seed_strategy(), da in 1usize..5, db in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(da * db, &mut rng);
        for sub in [Subsystem::A, Subsystem::B] {
            let t = partial_transpose(&m, da, db, sub).unwrap();
            prop_assert!((t.trace() - m.trace()).norm() < 1e-12);
            prop_assert_eq!(partial_transpose(&t, da, db, sub).unwrap(), m.clone());
        }
    }

    #[test]
    fn partial_trace_of_kron_factors(seed in seed_strategy(), da in 1usize..4, db in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(da, &mut rng);
        let b = random_matrix(db, &mut rng);
        let ab = kron(&a, &b);
        let ra = partial_trace(&ab, da, db, Subsystem::B).unwrap();
        let rb = partial_trace(&ab, da, db, Subsystem::A).unwrap();
        prop_assert!((&ra - &a.scale_complex(b.trace())).max_abs() < 1e-12);
        prop_assert!((&rb - &b.scale_complex(a.trace())).max_abs() < 1e-12);
    }

    #[test]
    fn trace_norm_dominates_trace(seed in seed_strategy(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(n, &mut rng);
        prop_assert!(trace_norm(&m) + 1e-12 >= m.trace().norm());
    }

    #[test]
    fn kron_spectrum_is_pairwise_products(seed in seed_strategy(), na in 1usize..5, nb in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(na, &mut rng);
        let b = random_hermitian(nb, &mut rng);
        let ea = eigh(&a).unwrap().eigenvalues;
        let eb = eigh(&b).unwrap().eigenvalues;
        let mut products: Vec<f64> = ea.iter().flat_map(|x| eb.iter().map(move |y| x * y)).collect();
        products.sort_by(|p, q| q.total_cmp(p));
        let got = eigh(&kron(&a, &b)).unwrap().eigenvalues;
        for (g, p) in got.iter().zip(&products) {
            prop_assert!((g - p).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_json_round_trip(seed in seed_strategy(), r in 1usize..6, cols in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let m = ComplexMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1e3..1e3), rng.random_range(-1.0..1.0)));
        let text = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}
