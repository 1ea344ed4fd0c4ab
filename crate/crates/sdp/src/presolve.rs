//! Shrinks a program before the interior-point iterations.
//!
//! Two reductions are applied:
//!
//! * Facial reduction on the dual side. If `C` and every `A_i` share a null
//!   vector `v` on some PSD block, the dual slack `C - Σ y_i A_i` is singular
//!   for every `y` and the interior-point method has no strictly feasible
//!   dual point to follow. With `N` an orthonormal basis of the common null
//!   space and `P` a set of rows on which `N` is invertible, every matrix `M`
//!   in the family satisfies `M = Eᵀ M_KK E` for the complementary index set
//!   `K`, so `M ⪰ 0 ⟺ M_KK ⪰ 0`. The block is replaced by its `K × K`
//!   principal submatrix, which keeps the data sparse.
//! * Linearly dependent constraints are dropped after checking that their
//!   right-hand sides are consistent.

use std::collections::BTreeMap;

use boundent_linalg::real_symmetric_eigh;
use nalgebra::DMatrix;

use crate::{BlockKind, ConicProgram, SparseSym};

/// Relative eigenvalue threshold for the common null space.
const NULL_TOL: f64 = 1e-10;
/// Relative pivot threshold for dependent constraints.
const DEPENDENCE_TOL: f64 = 1e-12;

pub(crate) struct Reduction {
    pub program: ConicProgram,
    /// For each original block: kept indices, or `None` when the block is
    /// unchanged.
    pub kept_indices: Vec<Option<Vec<usize>>>,
    /// Original constraint index of every constraint in `program`.
    pub kept_constraints: Vec<usize>,
    /// Index in `program` of every original block; `None` for blocks whose
    /// face is `{0}`.
    pub block_map: Vec<Option<usize>>,
}

pub(crate) enum PresolveOutcome {
    Reduced(Reduction),
    /// A dependent constraint has an inconsistent right-hand side.
    Inconsistent { constraint: usize, residual: f64 },
}

pub(crate) fn presolve(p: &ConicProgram) -> PresolveOutcome {
    let (faced, kept_indices) = facial_reduction(p);
    let (faced, block_map) = drop_empty_blocks(faced);
    match independent_constraints(&faced) {
        Ok(kept_constraints) => {
            let program = if kept_constraints.len() == faced.constraints.len() {
                faced
            } else {
                let mut q = ConicProgram::new(faced.sense, faced.blocks.clone());
                q.objective = faced.objective.clone();
                q.constraints = kept_constraints.iter().map(|&i| faced.constraints[i].clone()).collect();
                q
            };
            PresolveOutcome::Reduced(Reduction { program, kept_indices, kept_constraints, block_map })
        }
        Err((constraint, residual)) => PresolveOutcome::Inconsistent { constraint, residual },
    }
}

/// Removes blocks of size zero, which facial reduction leaves behind when a
/// whole block is forced to vanish.
fn drop_empty_blocks(p: ConicProgram) -> (ConicProgram, Vec<Option<usize>>) {
    if p.blocks.iter().all(|b| b.size > 0) {
        let map = (0..p.blocks.len()).map(Some).collect();
        return (p, map);
    }
    let mut map = vec![None; p.blocks.len()];
    let mut blocks = Vec::new();
    for (k, spec) in p.blocks.iter().enumerate() {
        if spec.size > 0 {
            map[k] = Some(blocks.len());
            blocks.push(*spec);
        }
    }
    let mut q = ConicProgram::new(p.sense, blocks);
    for (k, c) in p.objective.into_iter().enumerate() {
        if let Some(new) = map[k] {
            q.objective[new] = c;
        }
    }
    for con in p.constraints {
        let terms = con.terms.into_iter().filter_map(|(blk, a)| map[blk].map(|new| (new, a))).collect();
        q.add_constraint(terms, con.rhs);
    }
    (q, map)
}

/// Adds `M²` to `k_acc`, walking the sparse columns of `M`.
fn add_square(k_acc: &mut DMatrix<f64>, a: &SparseSym, n: usize) {
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, v) in a.entries() {
        cols[j].push((i, v));
        if i != j {
            cols[i].push((j, v));
        }
    }
    for col in &cols {
        for &(p, u) in col {
            for &(q, v) in col {
                k_acc[(p, q)] += u * v;
            }
        }
    }
}

fn facial_reduction(p: &ConicProgram) -> (ConicProgram, Vec<Option<Vec<usize>>>) {
    let mut kept_indices: Vec<Option<Vec<usize>>> = vec![None; p.blocks.len()];
    let mut per_block: Vec<Vec<&SparseSym>> = vec![Vec::new(); p.blocks.len()];
    for (blk, c) in p.objective.iter().enumerate() {
        per_block[blk].push(c);
    }
    for con in &p.constraints {
        for (blk, a) in &con.terms {
            per_block[*blk].push(a);
        }
    }

    for (blk, spec) in p.blocks.iter().enumerate() {
        if spec.kind != BlockKind::Psd || spec.size == 0 {
            continue;
        }
        let n = spec.size;
        let mut k_acc = DMatrix::zeros(n, n);
        for a in &per_block[blk] {
            add_square(&mut k_acc, a, n);
        }
        let spec_k = real_symmetric_eigh(&k_acc);
        let top = spec_k.eigenvalues.first().copied().unwrap_or(0.0);
        let null_dim = spec_k.eigenvalues.iter().filter(|&&v| v <= NULL_TOL * top).count();
        if null_dim == 0 {
            continue;
        }
        let null = spec_k.eigenvectors.columns(n - null_dim, null_dim).into_owned();
        let dropped = pivot_rows(&null);
        let keep: Vec<usize> = (0..n).filter(|i| !dropped.contains(i)).collect();
        kept_indices[blk] = Some(keep);
    }

    if kept_indices.iter().all(Option::is_none) {
        return (p.clone(), kept_indices);
    }

    let maps: Vec<Option<Vec<Option<usize>>>> = kept_indices
        .iter()
        .zip(&p.blocks)
        .map(|(keep, spec)| {
            keep.as_ref().map(|keep| {
                let mut map = vec![None; spec.size];
                for (new, &old) in keep.iter().enumerate() {
                    map[old] = Some(new);
                }
                map
            })
        })
        .collect();
    let restrict = |blk: usize, a: &SparseSym| match &maps[blk] {
        Some(map) => a.restrict(map),
        None => a.clone(),
    };
    let mut blocks = p.blocks.clone();
    for (blk, keep) in kept_indices.iter().enumerate() {
        if let Some(keep) = keep {
            blocks[blk].size = keep.len();
        }
    }
    let mut q = ConicProgram::new(p.sense, blocks);
    for (blk, c) in p.objective.iter().enumerate() {
        q.objective[blk] = restrict(blk, c);
    }
    for con in &p.constraints {
        let terms = con.terms.iter().map(|(blk, a)| (*blk, restrict(*blk, a))).collect();
        q.add_constraint(terms, con.rhs);
    }
    (q, kept_indices)
}

/// Rows of `basis` (n × k, full column rank) forming a well-conditioned
/// invertible k × k submatrix, chosen by Gaussian elimination with complete
/// pivoting.
fn pivot_rows(basis: &DMatrix<f64>) -> Vec<usize> {
    let (n, k) = basis.shape();
    let mut a = basis.clone();
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; k];
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = (0, 0, -1.0);
        for r in (0..n).filter(|&r| !row_used[r]) {
            for c in (0..k).filter(|&c| !col_used[c]) {
                if a[(r, c)].abs() > best.2 {
                    best = (r, c, a[(r, c)].abs());
                }
            }
        }
        let (pr, pc, _) = best;
        row_used[pr] = true;
        col_used[pc] = true;
        rows.push(pr);
        let pivot = a[(pr, pc)];
        for r in (0..n).filter(|&r| !row_used[r]) {
            let f = a[(r, pc)] / pivot;
            if f != 0.0 {
                for c in 0..k {
                    a[(r, c)] -= f * a[(pr, c)];
                }
            }
        }
    }
    rows.sort_unstable();
    rows
}

/// Indices of a maximal linearly independent subset of the constraint
/// matrices, in increasing order, or the first dependent constraint whose
/// right-hand side contradicts the others.
fn independent_constraints(p: &ConicProgram) -> Result<Vec<usize>, (usize, f64)> {
    let m = p.constraints.len();
    // A constraint that is alone on some matrix position cannot take part in
    // a vanishing linear combination.
    let mut touch: BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for (i, con) in p.constraints.iter().enumerate() {
        for (blk, a) in &con.terms {
            for &(r, c, v) in a.entries() {
                touch.entry((*blk, r, c)).or_default().push((i, v));
            }
        }
    }
    let mut private = vec![false; m];
    for list in touch.values() {
        if list.len() == 1 {
            private[list[0].0] = true;
        }
    }
    let suspects: Vec<usize> = (0..m).filter(|&i| !private[i]).collect();
    if suspects.is_empty() {
        return Ok((0..m).collect());
    }
    let mut local = vec![usize::MAX; m];
    for (k, &i) in suspects.iter().enumerate() {
        local[i] = k;
    }
    let s = suspects.len();
    let mut gram = DMatrix::<f64>::zeros(s, s);
    for (&(_, r, c), list) in &touch {
        let mult = if r == c { 1.0 } else { 2.0 };
        for &(i, u) in list {
            if local[i] == usize::MAX {
                continue;
            }
            for &(j, v) in list {
                if local[j] != usize::MAX {
                    gram[(local[i], local[j])] += mult * u * v;
                }
            }
        }
    }

    // Pivoted Cholesky; pivots that survive are independent.
    let diag0 = gram.diagonal();
    let scale = diag0.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut l = DMatrix::<f64>::zeros(s, s);
    let mut d: Vec<f64> = diag0.iter().copied().collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut is_chosen = vec![false; s];
    for step in 0..s {
        let Some((piv, &dv)) = d
            .iter()
            .enumerate()
            .filter(|(k, _)| !is_chosen[*k])
            .max_by(|a, b| a.1.total_cmp(b.1))
        else {
            break;
        };
        if dv <= DEPENDENCE_TOL * scale {
            break;
        }
        is_chosen[piv] = true;
        chosen.push(piv);
        let root = dv.sqrt();
        for k in 0..s {
            if is_chosen[k] && k != piv {
                continue;
            }
            let mut v = gram[(k, piv)];
            for t in 0..step {
                v -= l[(k, t)] * l[(piv, t)];
            }
            l[(k, step)] = v / root;
        }
        for k in 0..s {
            if !is_chosen[k] {
                d[k] -= l[(k, step)] * l[(k, step)];
            }
        }
    }
    let rank = chosen.len();
    if rank == s {
        return Ok((0..m).collect());
    }

    // Consistency of the dropped constraints: A_i = Σ α_k A_k over the chosen
    // pivots, with α solving the Gram system through the Cholesky factor.
    let lc = DMatrix::from_fn(rank, rank, |a, b| l[(chosen[a], b)]);
    let b_chosen: Vec<f64> = chosen.iter().map(|&k| p.constraints[suspects[k]].rhs).collect();
    let b_scale = p.constraints.iter().fold(1.0_f64, |a, c| a.max(c.rhs.abs()));
    for k in (0..s).filter(|&k| !is_chosen[k]) {
        let g = nalgebra::DVector::from_fn(rank, |a, _| gram[(chosen[a], k)]);
        let z = lc.solve_lower_triangular(&g).unwrap_or_else(|| nalgebra::DVector::zeros(rank));
        let alpha = lc.transpose().solve_upper_triangular(&z).unwrap_or_else(|| nalgebra::DVector::zeros(rank));
        let predicted: f64 = alpha.iter().zip(&b_chosen).map(|(a, b)| a * b).sum();
        let residual = p.constraints[suspects[k]].rhs - predicted;
        if residual.abs() > 1e-9 * b_scale {
            return Err((suspects[k], residual));
        }
    }
    let mut keep: Vec<usize> = (0..m).filter(|&i| private[i]).collect();
    keep.extend(chosen.iter().map(|&k| suspects[k]));
    keep.sort_unstable();
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{BlockSpec, Sense};

    #[test]
    fn common_null_vector_is_removed() {
        // every matrix annihilates (1, -1, 0)
        let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(3)]);
        p.set_objective(0, SparseSym::from_triplets([(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (2, 2, 2.0)]));
        p.add_constraint(vec![(0, SparseSym::from_triplets([(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]))], 1.0);
        p.add_constraint(vec![(0, SparseSym::from_triplets([(2, 2, 1.0)]))], 1.0);
        let PresolveOutcome::Reduced(r) = presolve(&p) else { panic!("unexpected inconsistency") };
        assert_eq!(r.program.blocks[0].size, 2);
        assert_eq!(r.kept_indices[0].as_ref().unwrap().len(), 2);
    }

    #[test]
    fn duplicate_constraint_is_dropped_or_rejected() {
        let a = SparseSym::from_triplets([(0, 1, 1.0)]);
        let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(2)]);
        p.set_objective(0, SparseSym::identity(2));
        p.add_constraint(vec![(0, a.clone())], 1.0);
        p.add_constraint(vec![(0, a.scaled(2.0))], 2.0);
        let PresolveOutcome::Reduced(r) = presolve(&p) else { panic!("consistent duplicate rejected") };
        assert_eq!(r.kept_constraints.len(), 1);

        p.constraints[1].rhs = 3.0;
        assert!(matches!(presolve(&p), PresolveOutcome::Inconsistent { .. }));
    }
}
