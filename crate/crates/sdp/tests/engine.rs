use boundent_linalg::{eigh, random_unitary, Complex64, ComplexMatrix};
use boundent_sdp::{
    complexify, embed_complex, embed_sparse, export_sdpa, parse_sdpa, read_sdpa, solve, write_sdpa, BlockSpec,
    ConicProgram, SdpStatus, Sense, SolverOptions, SparseSym,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn lambda_min_program() -> ConicProgram {
    let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(3)]);
    p.set_objective(0, SparseSym::from_triplets([(0, 0, 3.0), (1, 1, 1.0), (2, 2, 2.0)]));
    p.add_constraint(vec![(0, SparseSym::identity(3))], 1.0);
    p
}

fn assert_solution_sane(p: &ConicProgram, sol: &boundent_sdp::SdpSolution, tol: f64) {
    assert_eq!(sol.status, SdpStatus::Optimal);
    match p.sense {
        Sense::Maximize => assert!(sol.primal_value <= sol.dual_value + 10.0 * tol * (1.0 + sol.dual_value.abs())),
        Sense::Minimize => assert!(sol.primal_value >= sol.dual_value - 10.0 * tol * (1.0 + sol.dual_value.abs())),
    }
    assert!(sol.min_primal_eigenvalue() >= -10.0 * tol, "{}", sol.min_primal_eigenvalue());
    assert!(sol.primal_infeasibility <= tol);
    assert!(sol.dual_infeasibility <= tol);
}

#[test]
fn minimum_eigenvalue_by_trace_constraint() {
    let p = lambda_min_program();
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_solution_sane(&p, &sol, TOL);
    assert!((sol.primal_value - 1.0).abs() < 1e-8);
    assert!((sol.dual_value - 1.0).abs() < 1e-8);
    // the optimum puts all weight on the eigenvector of eigenvalue 1
    assert!((sol.x[0][(1, 1)] - 1.0).abs() < 1e-7);
}

#[test]
fn trace_maximization_below_identity_with_slack_block() {
    // max tr X  s.t.  X + Z = I, X, Z ⪰ 0
    let n = 2;
    let mut p = ConicProgram::new(Sense::Maximize, vec![BlockSpec::psd(n), BlockSpec::psd(n)]);
    p.set_objective(0, SparseSym::identity(n));
    for i in 0..n {
        for j in i..n {
            let e = SparseSym::from_triplets([(i, j, 1.0)]);
            p.add_constraint(vec![(0, e.clone()), (1, e)], if i == j { 1.0 } else { 0.0 });
        }
    }
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_solution_sane(&p, &sol, TOL);
    assert!((sol.primal_value - 2.0).abs() < 1e-8);
}

#[test]
fn linear_program_in_diagonal_block() {
    // max x0 + 2 x1  s.t.  x0 + x1 + x2 = 1, x1 + x3 = 0.4, x >= 0  → 1.4
    let mut p = ConicProgram::new(Sense::Maximize, vec![BlockSpec::diagonal(4)]);
    p.set_objective(0, SparseSym::from_triplets([(0, 0, 1.0), (1, 1, 2.0)]));
    p.add_constraint(vec![(0, SparseSym::from_triplets([(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]))], 1.0);
    p.add_constraint(vec![(0, SparseSym::from_triplets([(1, 1, 1.0), (3, 3, 1.0)]))], 0.4);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_solution_sane(&p, &sol, TOL);
    assert!((sol.primal_value - 1.4).abs() < 1e-8);
}

#[test]
fn mixed_blocks_and_dual_slack_sign() {
    // max ⟨C, X⟩ - t  s.t. tr X = 1, X_01 - t = 0, with t in an LP block
    let mut p = ConicProgram::new(Sense::Maximize, vec![BlockSpec::psd(2), BlockSpec::diagonal(1)]);
    p.set_objective(0, SparseSym::from_triplets([(0, 0, 1.0), (0, 1, 0.5)]));
    p.set_objective(1, SparseSym::from_triplets([(0, 0, -1.0)]));
    p.add_constraint(vec![(0, SparseSym::identity(2))], 1.0);
    p.add_constraint(vec![(0, SparseSym::from_triplets([(0, 1, 0.5)])), (1, SparseSym::from_triplets([(0, 0, -1.0)]))], 0.0);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_solution_sane(&p, &sol, TOL);
    // dual slack Σ y_i A_i - C is PSD at the optimum
    assert!(sol.min_dual_slack_eigenvalue() > -1e-8);
}

#[test]
fn singular_slack_is_reduced_before_solving() {
    // Every data matrix annihilates (1, -1, 0, 0): the dual slack is never
    // positive definite. Solved on the reduced face it matches the explicit
    // 3x3 formulation.
    let c = SparseSym::from_triplets([(0, 0, 2.0), (0, 1, 2.0), (1, 1, 2.0), (2, 2, 1.0), (3, 3, 3.0), (2, 3, 0.5)]);
    let a1 = SparseSym::from_triplets([(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
    let a2 = SparseSym::from_triplets([(0, 2, 1.0), (1, 2, 1.0)]);
    let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(4)]);
    p.set_objective(0, c);
    p.add_constraint(vec![(0, a1)], 1.0);
    p.add_constraint(vec![(0, a2)], 0.3);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_solution_sane(&p, &sol, TOL);

    // same program written on u = (e0 + e1)/√2, e2, e3
    let r = std::f64::consts::SQRT_2;
    let mut q = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(3)]);
    q.set_objective(0, SparseSym::from_triplets([(0, 0, 4.0), (1, 1, 1.0), (2, 2, 3.0), (1, 2, 0.5)]));
    q.add_constraint(vec![(0, SparseSym::from_triplets([(0, 0, 2.0), (1, 1, 1.0), (2, 2, 1.0)]))], 1.0);
    q.add_constraint(vec![(0, SparseSym::from_triplets([(0, 1, r)]))], 0.3);
    let reference = solve(&q, &SolverOptions::default()).unwrap();
    assert_solution_sane(&q, &reference, TOL);
    assert!((sol.primal_value - reference.primal_value).abs() < 1e-8);

    let plain = SolverOptions { presolve: false, ..SolverOptions::default() };
    let unreduced = solve(&p, &plain).unwrap();
    assert!((unreduced.primal_value - reference.primal_value).abs() < 1e-5);
}

#[test]
fn block_forced_to_zero_is_removed_and_restored() {
    // the second block appears nowhere, so its dual slack is identically zero
    let mut p = lambda_min_program();
    p.blocks.push(BlockSpec::psd(2));
    p.objective.push(SparseSym::new());
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_value - 1.0).abs() < 1e-8);
    assert_eq!(sol.x[1].shape(), (2, 2));
    assert_eq!(sol.x[1].amax(), 0.0);
}

#[test]
fn infeasible_program_is_flagged() {
    // tr X = -1 with X ⪰ 0
    let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(2)]);
    p.set_objective(0, SparseSym::identity(2));
    p.add_constraint(vec![(0, SparseSym::identity(2))], -1.0);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_ne!(sol.status, SdpStatus::Optimal);
}

#[test]
fn solver_is_deterministic() {
    let p = random_program(7, 4, 3);
    let a = solve(&p, &SolverOptions::default()).unwrap();
    let b = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
    assert_eq!(a.y, b.y);
}

#[test]
fn sdpa_round_trip_is_identical() {
    for p in [lambda_min_program(), random_program(3, 5, 4)] {
        let text = write_sdpa(&p);
        assert_eq!(parse_sdpa(&text).unwrap(), p);
    }
}

#[test]
fn sdpa_block_structure_line_lists_sizes_in_order() {
    let mut p = ConicProgram::new(Sense::Maximize, vec![BlockSpec::psd(3), BlockSpec::diagonal(2), BlockSpec::psd(1)]);
    p.add_constraint(vec![(1, SparseSym::from_triplets([(1, 1, 1.0)]))], 1.0);
    let text = write_sdpa(&p);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
    assert_eq!(data[0], "1");
    assert_eq!(data[1], "3");
    assert_eq!(data[2], "3 -2 1");
    // upper-triangle entries only
    for line in &data[4..] {
        let f: Vec<usize> = line.split_whitespace().take(4).map(|t| t.parse().unwrap()).collect();
        assert!(f[2] <= f[3]);
    }
}

#[test]
fn sdpa_file_export_and_resolve() {
    let p = random_program(11, 6, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.dat-s");
    export_sdpa(&p, &path).unwrap();
    let back = read_sdpa(&path).unwrap();
    let a = solve(&p, &SolverOptions::default()).unwrap();
    let b = solve(&back, &SolverOptions::default()).unwrap();
    assert!((a.primal_value - b.primal_value).abs() < 1e-6);
}

#[test]
fn embedding_doubles_the_spectrum() {
    let u = random_unitary(3, 5);
    let h = ComplexMatrix::from_real_diagonal(&[2.0, 0.0, -1.0]).conjugate_by(&u);
    let e = embed_complex(&h).unwrap();
    let mut ev: Vec<f64> = e.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let expected = [2.0, 2.0, 0.0, 0.0, -1.0, -1.0];
    for (g, w) in ev.iter().zip(expected) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn embedding_inner_product_is_twice_real_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = rng.random_range(1..6);
        let a = random_hermitian(n, &mut rng);
        let b = random_hermitian(n, &mut rng);
        let lhs = embed_complex(&a).unwrap().dot(&embed_complex(&b).unwrap());
        let rhs = 2.0 * (&a * &b).trace().re;
        assert!((lhs - rhs).abs() < 1e-12);
        // the sparse form and the inverse map agree with the dense one
        let x = embed_complex(&b).unwrap();
        assert!((embed_sparse(&a, 0.0).dot_dense(&x) - lhs).abs() < 1e-12);
        assert!((&complexify(&x) - &b).max_abs() < 1e-14);
    }
}

#[test]
fn complexified_psd_matrix_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(1..5);
        let g = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.random_range(-1.0..1.0));
        let x = &g * g.transpose();
        let m = complexify(&x);
        assert!(eigh(&m).unwrap().min() > -1e-12);
    }
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .hermitian_part()
}

/// Feasible and bounded by construction: `A_0 = I` with `b_0 > 0` bounds the
/// primal, and the right-hand sides come from a positive definite point.
fn random_program(seed: u64, n: usize, m: usize) -> ConicProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_sym = |rng: &mut ChaCha8Rng, density: f64| {
        let mut t = Vec::new();
        for i in 0..n {
            for j in i..n {
                if rng.random_bool(density) {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseSym::from_triplets(t)
    };
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = &g * g.transpose() + DMatrix::identity(n, n);
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut p = ConicProgram::new(sense, vec![BlockSpec::psd(n)]);
    p.set_objective(0, rand_sym(&mut rng, 0.6));
    p.add_constraint(vec![(0, SparseSym::identity(n))], x0.trace());
    for _ in 1..m {
        let a = rand_sym(&mut rng, 0.4);
        if a.is_empty() {
            continue;
        }
        let rhs = a.dot_dense(&x0);
        p.add_constraint(vec![(0, a)], rhs);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn weak_duality_and_feasibility_on_random_programs(seed in any::<u64>(), n in 2usize..7, m in 1usize..8) {
        let p = random_program(seed, n, m);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Optimal);
        match p.sense {
            Sense::Maximize => prop_assert!(sol.primal_value <= sol.dual_value + 10.0 * TOL * (1.0 + sol.dual_value.abs())),
            Sense::Minimize => prop_assert!(sol.primal_value >= sol.dual_value - 10.0 * TOL * (1.0 + sol.dual_value.abs())),
        }
        prop_assert!(sol.min_primal_eigenvalue() >= -10.0 * TOL);
        prop_assert!(sol.min_dual_slack_eigenvalue() >= -1e-6);
        prop_assert!(sol.primal_infeasibility <= TOL);
    }
}
