use boundent::game::{paper_strategy_d3, score_classical, score_quantum, ClassicalStrategy, Decoder, GameSpec};
use boundent::qobjects::Povm;
use boundent::relaxation::*;
use boundent_linalg::{kron, random_unitary_with, unit_ket_with, ComplexMatrix};
use boundent_sdp::{parse_sdpa, write_sdpa, SparseSym};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn generators_preserve_winning_events() {
    for d in [3, 5, 7] {
        let spec = GameSpec::new(d).unwrap();
        let actions = symmetry_actions(d).unwrap();
        for i in 0..actions.num_events() {
            let e = actions.event(i);
            let wins = e.c == spec.win(e.x, e.y, e.z);
            for g in Generator::ALL {
                let f = actions.apply(g, 1, &e);
                assert_eq!(f.z, e.z);
                assert_eq!(f.c == spec.win(f.x, f.y, f.z), wins, "d={d} {g:?} {e:?}");
            }
        }
    }
}

#[test]
fn generators_have_order_d_and_permute_events() {
    for d in [3, 5, 7] {
        let actions = symmetry_actions(d).unwrap();
        let n = actions.num_events();
        for g in Generator::ALL {
            let perm = actions.permutation(g, 1);
            let mut seen = vec![false; n];
            for &j in perm {
                seen[j as usize] = true;
            }
            assert!(seen.iter().all(|&s| s), "{g:?} is not a bijection");
            for i in 0..n {
                let e = actions.event(i);
                let mut f = e;
                for _ in 0..d {
                    f = actions.apply(g, 1, &f);
                }
                assert_eq!(f, e);
                assert_eq!(actions.apply(g, 2, &e), actions.apply(g, 1, &actions.apply(g, 1, &e)));
            }
        }
    }
}

/// Relabels inputs of a deterministic strategy by one generator and the
/// decoder's answers by the matching shift; the score must not move.
#[test]
fn relabeled_classical_strategies_keep_their_score() {
    let d = 3;
    let spec = GameSpec::new(d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let alice: Vec<usize> = (0..d * d).map(|_| rng.random_range(0..d)).collect();
        let bob: Vec<usize> = (0..d * d).map(|_| rng.random_range(0..d)).collect();
        let table: Vec<usize> = (0..d * d * (d + 1)).map(|_| rng.random_range(0..d)).collect();
        let base = ClassicalStrategy { alice: alice.clone(), bob: bob.clone(), decoder: Decoder::Table(table.clone()) };
        let score = score_classical(&spec, &base).unwrap();
        for g in Generator::ALL {
            // input x is answered as the preimage would have been, then relabeled
            let pre = |i: usize, first: bool| {
                let (a, b) = spec.pair(i);
                let shifted = if first { ((a + d - 1) % d, b) } else { (a, (b + d - 1) % d) };
                shifted.0 * d + shifted.1
            };
            let (na, nb): (Vec<usize>, Vec<usize>) = match g {
                Generator::ShiftX0 => ((0..d * d).map(|i| alice[pre(i, true)]).collect(), bob.clone()),
                Generator::ShiftX1 => ((0..d * d).map(|i| alice[pre(i, false)]).collect(), bob.clone()),
                Generator::ShiftY0 => (alice.clone(), (0..d * d).map(|i| bob[pre(i, true)]).collect()),
                Generator::ShiftY1 => (alice.clone(), (0..d * d).map(|i| bob[pre(i, false)]).collect()),
            };
            let nt: Vec<usize> = (0..table.len())
                .map(|k| {
                    let z = k % (d + 1);
                    let shift = g.answer_shift(d, z);
                    (table[k] as i64 + shift).rem_euclid(d as i64) as usize
                })
                .collect();
            let moved = ClassicalStrategy { alice: na, bob: nb, decoder: Decoder::Table(nt) };
            let s = score_classical(&spec, &moved).unwrap();
            assert!((s - score).abs() < 1e-12, "{g:?}: {s} vs {score}");
        }
    }
}

#[test]
fn reduced_model_has_expected_shape() {
    for d in [3, 5] {
        let m = ReducedMomentModel::new(d).unwrap();
        assert_eq!(m.size, d * d + d * d * d * (d + 1));
        assert_eq!(m.num_unknowns(), d * (d + 1) + 2);
        let mut hits = DMatrix::<u32>::zeros(m.size, m.size);
        for x in &m.structure {
            for &(i, j, v) in x.entries() {
                assert_eq!(v, 1.0);
                hits[(i, j)] += 1;
                if i != j {
                    hits[(j, i)] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1), "every position belongs to exactly one symbol");
        for i in 0..m.size {
            assert_eq!(m.index(m.row(i)), i);
        }
    }
    assert_eq!(ReducedMomentModel::new(3).unwrap().size, 117);
    assert_eq!(ReducedMomentModel::new(3).unwrap().num_unknowns(), 14);
    assert!(ReducedMomentModel::new(4).is_err());
}

#[test]
fn commuting_family_splits_into_small_blocks() {
    // cyclic shift P on 6 points: I, P + Pᵀ, P² + P⁴ commute
    let n = 6;
    let p = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
    let fam = [DMatrix::identity(n, n), &p + p.transpose(), &p * &p + (&p * &p).transpose()];
    let sparse: Vec<SparseSym> = fam.iter().map(|m| SparseSym::from_dense(m, 0.0)).collect();
    let b = block_diagonalize_family(&sparse, n, 3);
    assert!(b.block_sizes.iter().all(|&s| s <= 2), "{:?}", b.block_sizes);
    assert!(b.leakage <= 1e-9);
}

#[test]
fn block_transform_is_orthogonal_with_small_leakage() {
    let m = ReducedMomentModel::new(3).unwrap();
    let b = block_diagonalize(&m, 0);
    assert!(!b.fallback);
    assert!(b.leakage <= 1e-9, "leakage {}", b.leakage);
    assert_eq!(b.block_sizes.iter().sum::<usize>(), m.size);
    assert!(b.block_sizes.len() > 1);
    let tt = b.transform.transpose() * &b.transform;
    assert!((tt - DMatrix::identity(m.size, m.size)).amax() < 1e-10);
    // off-block parts of every structure matrix vanish
    let offsets = b.offsets();
    for x in &m.structure {
        let t = b.transform.transpose() * x.to_dense(m.size) * &b.transform;
        for (l, &o) in offsets.iter().enumerate() {
            let s = b.block_sizes[l];
            for i in 0..m.size {
                for j in o..o + s {
                    if i < o || i >= o + s {
                        assert!(t[(i, j)].abs() < 1e-9);
                    }
                }
            }
        }
    }
    // same seed rebuilds the same transform
    let again = block_diagonalize(&m, 0);
    assert_eq!(again.block_sizes, b.block_sizes);
    assert!((again.transform - &b.transform).amax() < 1e-12);
}

#[test]
fn reduced_relaxation_d3_gives_the_classical_bound() {
    let bound = 0.5;
    for use_blocks in [false, true] {
        let p = solve_primal(3, use_blocks).unwrap();
        assert!((p.value - bound).abs() < 1e-6, "blocks={use_blocks}: {}", p.value);
        assert!(p.min_eigenvalue > -1e-7, "{}", p.min_eigenvalue);
        for row in &p.assignment.q {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(p.blocks.seed.is_some(), use_blocks);
    }
}

#[test]
fn certificate_d3_verifies_and_round_trips() {
    let sol = solve_reduced(3, &RelaxationOptions::for_dimension(3)).unwrap();
    let cert = &sol.certificate;
    assert!((cert.objective - sol.primal.value).abs() < 1e-6);
    assert!(cert.residuals.max_abs() <= 1e-8);
    assert!(cert.residuals.delta_rho.abs() <= 1e-8);
    let report = verify_certificate(cert, 3).unwrap();
    assert!(report.certified_bound >= 0.5 - 1e-6 && report.certified_bound <= 0.5 + 1e-6, "{}", report.certified_bound);

    let back = DualCertificate::from_json(&cert.to_json().unwrap()).unwrap();
    assert_eq!(&back, cert);
    let again = verify_certificate(&back, 3).unwrap();
    assert_eq!(again.certified_bound, report.certified_bound);

    assert!(verify_certificate(cert, 5).is_err());
}

#[test]
fn certificate_with_blocks_d3_verifies() {
    let opts = RelaxationOptions { use_blocks: true, ..RelaxationOptions::for_dimension(3) };
    let sol = solve_reduced(3, &opts).unwrap();
    let report = verify_certificate(&sol.certificate, 3).unwrap();
    assert!((report.certified_bound - 0.5).abs() < 1e-6);
    assert_eq!(report.block_sizes, sol.certificate.block_sizes);
}

#[test]
fn perturbed_certificate_is_rejected_with_a_named_error() {
    let sol = solve_reduced(3, &RelaxationOptions::for_dimension(3)).unwrap();
    let m = ReducedMomentModel::new(3).unwrap();
    // a symmetric pair at a position holding q(1|0)
    let &(i, j, _) = m
        .structure_of(Symbol::Q { miss: 1, z: 0 })
        .unwrap()
        .entries()
        .iter()
        .find(|e| e.0 != e.1)
        .unwrap();
    let mut bad = sol.certificate.clone();
    bad.blocks[0][i][j] += 1e-3;
    bad.blocks[0][j][i] += 1e-3;
    let err = verify_certificate(&bad, 3).unwrap_err().to_string();
    assert!(err.contains("dual equality for q(c̃=1|z=0)") || err.contains("eigenvalue"), "{err}");

    let mut asym = sol.certificate.clone();
    asym.blocks[0][i][j] += 1e-3;
    assert!(verify_certificate(&asym, 3).unwrap_err().to_string().contains("not symmetric"));

    let mut wrong = sol.certificate.clone();
    wrong.objective -= 0.01;
    assert!(verify_certificate(&wrong, 3).unwrap_err().to_string().contains("stored objective"));
}

#[test]
fn grouped_probabilities_reproduce_the_score() {
    let spec = GameSpec::new(3).unwrap();
    let s = paper_strategy_d3();
    let d = 3;
    let n = d * d;
    let mut p = vec![0.0; n * n * (d + 1) * d];
    for x in 0..n {
        for y in 0..n {
            let v = kron(&s.alice.unitaries[x], &s.bob.unitaries[y]);
            let rho = s.state.matrix.conjugate_by(&v);
            for (z, m) in s.measurements.iter().enumerate() {
                for (c, e) in m.effects.iter().enumerate() {
                    p[((x * n + y) * (d + 1) + z) * d + c] = rho.trace_product(e).re;
                }
            }
        }
    }
    let q = group_probabilities(d, &p).unwrap();
    let a = Assignment { delta_rho: 0.0, delta_sigma: 0.0, q };
    let score = score_quantum(&spec, &s).unwrap();
    assert!((a.winning_average() - score).abs() < 1e-12, "{} vs {score}", a.winning_average());
}

#[test]
fn sdpa_export_of_reduced_program_round_trips() {
    let rp = reduced_program(3, &RelaxationOptions::for_dimension(3)).unwrap();
    let text = write_sdpa(&rp.program);
    let back = parse_sdpa(&text).unwrap();
    assert_eq!(back.num_constraints(), rp.program.num_constraints());
    assert_eq!(back.rhs(), rp.program.rhs());
}

fn random_projective(d: usize, z: usize, rng: &mut ChaCha8Rng) -> Povm {
    let u = random_unitary_with(d * d, rng);
    let effects = (0..d)
        .map(|c| {
            let mut e = ComplexMatrix::zeros(d * d, d * d);
            for k in 0..d {
                let col = u.as_inner().column(c * d + k).into_owned();
                e += &ComplexMatrix::projector(&col);
            }
            e
        })
        .collect();
    Povm::new(z, effects).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn product_strategies_are_feasible(seed in any::<u64>()) {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alice: Vec<_> = (0..d * d).map(|_| unit_ket_with(d, &mut rng)).collect();
        let bob: Vec<_> = (0..d * d).map(|_| unit_ket_with(d, &mut rng)).collect();
        let ms: Vec<_> = (0..=d).map(|z| random_projective(d, z, &mut rng)).collect();
        let a = assignment_from_product(d, &alice, &bob, &ms).unwrap();
        let m = ReducedMomentModel::new(d).unwrap();
        let g = m.assemble(&a);
        let min = g.symmetric_eigenvalues().min();
        prop_assert!(min > -1e-9, "min eigenvalue {min}");
        prop_assert!(a.winning_average() <= 0.5 + 1e-9);
    }
}
