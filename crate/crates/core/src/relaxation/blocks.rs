//! Simultaneous block diagonalization of a family of symmetric matrices.
//!
//! The eigenspaces of a random positive combination `Σ r_k X_k` are the
//! building blocks. Two eigenspaces are joined when a second random
//! combination couples them; the connected groups span subspaces invariant
//! under every `X_k`, and an orthonormal basis adapted to them block
//! diagonalizes the whole family. The result is checked against every member
//! before it is accepted.

use boundent_linalg::real_symmetric_eigh;
use boundent_sdp::SparseSym;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative gap that separates two eigenvalue clusters.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Largest accepted off-block entry relative to `‖X_k‖_max`.
pub const LEAKAGE_TOL: f64 = 1e-9;
/// Seeds tried before giving up and keeping a single block.
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone)]
pub struct BlockDiagonalizer {
    /// Orthogonal matrix whose columns are grouped block by block.
    pub transform: DMatrix<f64>,
    pub block_sizes: Vec<usize>,
    /// Largest off-block entry bound over the family, relative to each
    /// member's largest entry.
    pub leakage: f64,
    /// Seed of the accepted attempt.
    pub seed: u64,
    pub attempts: usize,
    /// True when no attempt passed and the identity was kept.
    pub fallback: bool,
}

/// Summary that travels with solutions and certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub block_sizes: Vec<usize>,
    pub leakage: f64,
    pub seed: Option<u64>,
    pub attempts: usize,
    pub fallback: bool,
}

impl BlockDiagonalizer {
    pub fn identity(n: usize) -> Self {
        BlockDiagonalizer {
            transform: DMatrix::identity(n, n),
            block_sizes: vec![n],
            leakage: 0.0,
            seed: 0,
            attempts: 0,
            fallback: false,
        }
    }

    pub fn size(&self) -> usize {
        self.transform.nrows()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.block_sizes.len());
        let mut acc = 0;
        for &b in &self.block_sizes {
            out.push(acc);
            acc += b;
        }
        out
    }

    pub fn info(&self, reduced: bool) -> BlockInfo {
        BlockInfo {
            block_sizes: self.block_sizes.clone(),
            leakage: self.leakage,
            seed: (reduced && !self.fallback).then_some(self.seed),
            attempts: self.attempts,
            fallback: self.fallback,
        }
    }

    /// `T_lᵀ X T_l` for every block `l`.
    pub fn transform_blocks(&self, x: &SparseSym) -> Vec<DMatrix<f64>> {
        self.transform_with_leakage(x).0
    }

    /// Diagonal blocks of `Tᵀ X T` and a bound on the largest off-block
    /// entry: each off-block column of `T_kᵀ X T_l` is bounded by the norm of
    /// the matching column of `X T_l − T_l (T_lᵀ X T_l)`.
    pub fn transform_with_leakage(&self, x: &SparseSym) -> (Vec<DMatrix<f64>>, f64) {
        let n = self.size();
        let single = self.block_sizes.len() == 1 && self.transform == DMatrix::identity(n, n);
        if single {
            return (vec![x.to_dense(n)], 0.0);
        }
        let offsets = self.offsets();
        let parts: Vec<(DMatrix<f64>, f64)> = offsets
            .par_iter()
            .zip(&self.block_sizes)
            .map(|(&off, &b)| {
                let tl = self.transform.columns(off, b);
                let mut xt = DMatrix::<f64>::zeros(n, b);
                for &(i, j, v) in x.entries() {
                    for k in 0..b {
                        xt[(i, k)] += v * tl[(j, k)];
                        if i != j {
                            xt[(j, k)] += v * tl[(i, k)];
                        }
                    }
                }
                let block = tl.transpose() * &xt;
                let block = (&block + block.transpose()) * 0.5;
                let resid = &xt - tl * &block;
                let leak = resid.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
                (block, leak)
            })
            .collect();
        let leak = parts.iter().map(|p| p.1).fold(0.0, f64::max);
        (parts.into_iter().map(|p| p.0).collect(), leak)
    }
}

fn max_abs(x: &SparseSym) -> f64 {
    x.entries().iter().map(|e| e.2.abs()).fold(0.0, f64::max)
}

fn random_combination(family: &[SparseSym], n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for x in family {
        let r: f64 = rng.random_range(0.1..=1.0);
        for &(i, j, v) in x.entries() {
            a[(i, j)] += r * v;
            if i != j {
                a[(j, i)] += r * v;
            }
        }
    }
    a
}

fn sparse_apply(x: &SparseSym, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for &(i, j, a) in x.entries() {
        out[i] += a * v[j];
        if i != j {
            out[j] += a * v[i];
        }
    }
    out
}

/// Removes the components of `w` along the columns of `basis` (two passes).
fn orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(w);
            w.axpy(-c, b, 1.0);
        }
    }
}

/// Smallest subspace containing `start` and invariant under every member.
/// Starting outside an invariant subspace keeps the closure outside it, so
/// only the finished basis is cleaned against `outside`.
fn invariant_closure(family: &[SparseSym], start: DVector<f64>, outside: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut basis = vec![start];
    let mut next = 0;
    while next < basis.len() {
        let v = basis[next].clone();
        next += 1;
        for x in family {
            let mut w = sparse_apply(x, &v);
            let scale = w.norm();
            orthogonalize(&mut w, &basis);
            let norm = w.norm();
            if norm > 1e-8 * scale.max(1.0) {
                basis.push(w / norm);
            }
        }
    }
    for k in 0..basis.len() {
        let (done, rest) = basis.split_at_mut(k);
        let v = &mut rest[0];
        orthogonalize(v, outside);
        orthogonalize(v, done);
        let norm = v.norm();
        *v /= norm;
    }
    basis
}

/// Splits the invariant subspace spanned by `group` (orthonormal columns)
/// into the subspaces generated by each seed vector, plus whatever is left.
fn split_invariant(family: &[SparseSym], group: &DMatrix<f64>, seeds: &[DVector<f64>]) -> Vec<DMatrix<f64>> {
    let dim = group.ncols();
    let mut found: Vec<DVector<f64>> = Vec::new();
    let mut pieces = Vec::new();
    for s in seeds {
        if found.len() >= dim {
            break;
        }
        let mut v = s.clone();
        orthogonalize(&mut v, &found);
        let norm = v.norm();
        if norm < 0.5 {
            continue;
        }
        let module = invariant_closure(family, v / norm, &found);
        if found.len() + module.len() > dim {
            // numerical trouble: keep the group whole
            return vec![group.clone()];
        }
        pieces.push(DMatrix::from_columns(&module));
        found.extend(module);
    }
    if found.len() < dim {
        let mut rest = Vec::new();
        for k in 0..dim {
            let mut v = group.column(k).into_owned();
            orthogonalize(&mut v, &found);
            orthogonalize(&mut v, &rest);
            let norm = v.norm();
            if norm > 1e-6 {
                rest.push(v / norm);
            }
        }
        if found.len() + rest.len() != dim {
            return vec![group.clone()];
        }
        found.extend(rest.iter().cloned());
        pieces.push(DMatrix::from_columns(&rest));
    }
    pieces
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn attempt(family: &[SparseSym], n: usize, seed: u64) -> Option<BlockDiagonalizer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_combination(family, n, &mut rng);
    let eig = real_symmetric_eigh(&a);
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

    let mut cluster_of = vec![0usize; n];
    let mut clusters = 1;
    for k in 1..n {
        if (eig.eigenvalues[k - 1] - eig.eigenvalues[k]).abs() > CLUSTER_TOL * scale {
            clusters += 1;
        }
        cluster_of[k] = clusters - 1;
    }

    // couplings between eigenvectors under a second, independent combination
    let b = random_combination(family, n, &mut rng);
    let q = &eig.eigenvectors;
    let coupled = q.transpose() * (&b * q);
    let threshold = 1e-7 * coupled.amax().max(1.0);
    let mut uf = UnionFind((0..clusters).collect());
    for j in 0..n {
        for i in 0..j {
            if cluster_of[i] != cluster_of[j] && coupled[(i, j)].abs() > threshold {
                uf.union(cluster_of[i], cluster_of[j]);
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = std::collections::HashMap::new();
    for k in 0..n {
        let root = uf.find(cluster_of[k]);
        let g = *group_of_root.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    // split each group into the invariant subspaces generated by single
    // eigenvectors of its first cluster
    let mut pieces: Vec<DMatrix<f64>> = Vec::new();
    for g in &groups {
        let basis = DMatrix::from_fn(n, g.len(), |i, k| q[(i, g[k])]);
        let first = cluster_of[g[0]];
        let seeds: Vec<usize> = g.iter().copied().filter(|&k| cluster_of[k] == first).collect();
        pieces.extend(split_invariant(family, &basis, &seeds.iter().map(|&k| q.column(k).into_owned()).collect::<Vec<_>>()));
    }
    // larger blocks first
    pieces.sort_by_key(|p| std::cmp::Reverse(p.ncols()));
    let block_sizes: Vec<usize> = pieces.iter().map(|p| p.ncols()).collect();
    let mut transform = DMatrix::zeros(n, n);
    let mut col = 0;
    for p in &pieces {
        transform.columns_mut(col, p.ncols()).copy_from(p);
        col += p.ncols();
    }

    let mut candidate =
        BlockDiagonalizer { transform, block_sizes, leakage: 0.0, seed, attempts: 0, fallback: false };
    let mut leakage: f64 = 0.0;
    for x in family {
        let norm = max_abs(x);
        if norm == 0.0 {
            continue;
        }
        let (_, leak) = candidate.transform_with_leakage(x);
        leakage = leakage.max(leak / norm);
        if leakage > LEAKAGE_TOL {
            return None;
        }
    }
    candidate.leakage = leakage;
    Some(candidate)
}

/// Block diagonalizes `family` (symmetric `n × n` matrices). Attempts use
/// seeds `seed, seed+1, ...`; after [`MAX_ATTEMPTS`] failures the identity is
/// returned with `fallback` set.
pub fn block_diagonalize_family(family: &[SparseSym], n: usize, seed: u64) -> BlockDiagonalizer {
    for k in 0..MAX_ATTEMPTS {
        if let Some(mut found) = attempt(family, n, seed.wrapping_add(k as u64)) {
            found.attempts = k + 1;
            return found;
        }
    }
    BlockDiagonalizer { attempts: MAX_ATTEMPTS, fallback: true, ..BlockDiagonalizer::identity(n) }
}

/// Rebuilds the transform of an accepted attempt from its seed.
pub fn block_diagonalize_with_seed(family: &[SparseSym], n: usize, seed: u64) -> Option<BlockDiagonalizer> {
    attempt(family, n, seed).map(|mut b| {
        b.attempts = 1;
        b
    })
}
