use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::SdpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Cone of a variable block: full PSD matrices, or nonnegative diagonals
/// (linear-programming variables, written with negative sizes in SDPA files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Psd,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
    pub kind: BlockKind,
}

impl BlockSpec {
    pub fn psd(size: usize) -> Self {
        BlockSpec { size, kind: BlockKind::Psd }
    }

    pub fn diagonal(size: usize) -> Self {
        BlockSpec { size, kind: BlockKind::Diagonal }
    }

    /// Number of free scalars in the block.
    pub fn scalar_count(&self) -> usize {
        match self.kind {
            BlockKind::Psd => self.size * (self.size + 1) / 2,
            BlockKind::Diagonal => self.size,
        }
    }
}

/// Symmetric matrix stored through its upper triangle: each `(i, j, v)` with
/// `i <= j` stands for `v` at both `(i, j)` and `(j, i)`. Entries are sorted
/// and contain no duplicates or zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        SparseSym::default()
    }

    /// Builds from arbitrary triplets. `(i, j)` and `(j, i)` name the same
    /// entry; repeated entries are summed.
    pub fn from_triplets(triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut entries: Vec<(usize, usize, f64)> =
            triplets.into_iter().map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) }).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        SparseSym { entries: merged }
    }

    /// Upper-triangular part of a dense symmetric matrix; entries with
    /// magnitude at most `drop_tol` are skipped.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v.abs() > drop_tol {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSym { entries }
    }

    pub fn identity(n: usize) -> Self {
        SparseSym { entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest row/column index plus one.
    pub fn min_dim(&self) -> usize {
        self.entries.iter().map(|e| e.1 + 1).max().unwrap_or(0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|e| e.0 == e.1)
    }

    pub fn scaled(&self, s: f64) -> Self {
        if s == 0.0 {
            return SparseSym::new();
        }
        SparseSym { entries: self.entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect() }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &SparseSym, s: f64) -> Self {
        SparseSym::from_triplets(
            self.entries.iter().copied().chain(other.entries.iter().map(|&(i, j, v)| (i, j, v * s))),
        )
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Frobenius inner product with a dense symmetric matrix.
    pub fn dot_dense(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { v * (x[(i, j)] + x[(j, i)]) })
            .sum()
    }

    /// Frobenius inner product of two sparse symmetric matrices.
    pub fn dot(&self, other: &SparseSym) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.entries.len() && b < other.entries.len() {
            let (i, j, u) = self.entries[a];
            let (k, l, v) = other.entries[b];
            match (i, j).cmp(&(k, l)) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += if i == j { u * v } else { 2.0 * u * v };
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Principal submatrix on `keep` (sorted indices), re-indexed densely.
    pub fn restrict(&self, keep_map: &[Option<usize>]) -> Self {
        SparseSym {
            entries: self
                .entries
                .iter()
                .filter_map(|&(i, j, v)| match (keep_map[i], keep_map[j]) {
                    (Some(a), Some(b)) => Some((a.min(b), a.max(b), v)),
                    _ => None,
                })
                .collect(),
        }
    }
}

/// One equality `Σ_blocks ⟨A_block, X_block⟩ = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, SparseSym)>,
    pub rhs: f64,
}

/// `opt ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X ⪰ 0` over a product of blocks.
///
/// The dual is `opt' b·y  s.t.  C - Σ y_i A_i ⪰ 0` for minimization and
/// `Σ y_i A_i - C ⪰ 0` for maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub sense: Sense,
    pub blocks: Vec<BlockSpec>,
    pub objective: Vec<SparseSym>,
    pub constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new(sense: Sense, blocks: Vec<BlockSpec>) -> Self {
        let objective = vec![SparseSym::new(); blocks.len()];
        ConicProgram { sense, blocks, objective, constraints: Vec::new() }
    }

    pub fn set_objective(&mut self, block: usize, c: SparseSym) {
        self.objective[block] = c;
    }

    /// Appends a constraint and returns its index. Terms on the same block are
    /// merged.
    pub fn add_constraint(&mut self, terms: Vec<(usize, SparseSym)>, rhs: f64) -> usize {
        let mut merged: Vec<(usize, SparseSym)> = Vec::with_capacity(terms.len());
        for (blk, a) in terms {
            match merged.iter_mut().find(|(b, _)| *b == blk) {
                Some((_, existing)) => *existing = existing.add_scaled(&a, 1.0),
                None => merged.push((blk, a)),
            }
        }
        merged.retain(|(_, a)| !a.is_empty());
        merged.sort_by_key(|(b, _)| *b);
        self.constraints.push(Constraint { terms: merged, rhs });
        self.constraints.len() - 1
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_scalar_variables(&self) -> usize {
        self.blocks.iter().map(BlockSpec::scalar_count).sum()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.blocks.len() {
            return Err(SdpError::Malformed(format!(
                "{} objective blocks for {} variable blocks",
                self.objective.len(),
                self.blocks.len()
            )));
        }
        let check = |blk: usize, a: &SparseSym, what: &str| -> Result<(), SdpError> {
            let spec = self
                .blocks
                .get(blk)
                .ok_or_else(|| SdpError::Malformed(format!("{what} refers to missing block {blk}")))?;
            if a.min_dim() > spec.size {
                return Err(SdpError::Malformed(format!(
                    "{what} has an entry outside block {blk} of size {}",
                    spec.size
                )));
            }
            if spec.kind == BlockKind::Diagonal && !a.is_diagonal() {
                return Err(SdpError::Malformed(format!("{what} has an off-diagonal entry in diagonal block {blk}")));
            }
            if a.entries().iter().any(|e| !e.2.is_finite()) {
                return Err(SdpError::Malformed(format!("{what} has a non-finite entry")));
            }
            Ok(())
        };
        for (blk, c) in self.objective.iter().enumerate() {
            check(blk, c, "objective")?;
        }
        for (i, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("constraint {i} has a non-finite right-hand side")));
            }
            for (blk, a) in &con.terms {
                check(*blk, a, &format!("constraint {i}"))?;
            }
        }
        Ok(())
    }

    /// `⟨C, X⟩` for dense block values.
    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        self.objective.iter().zip(x).map(|(c, xb)| c.dot_dense(xb)).sum()
    }

    /// `⟨A_i, X⟩` for every constraint.
    pub fn constraint_values(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| con.terms.iter().map(|(b, a)| a.dot_dense(&x[*b])).sum())
            .collect()
    }

    /// Dual slack for multipliers `y`: `C - Σ y_i A_i` when minimizing,
    /// `Σ y_i A_i - C` when maximizing.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut s: Vec<DMatrix<f64>> =
            self.blocks.iter().zip(&self.objective).map(|(spec, c)| c.to_dense(spec.size)).collect();
        for (con, &yi) in self.constraints.iter().zip(y) {
            for (b, a) in &con.terms {
                for &(i, j, v) in a.entries() {
                    s[*b][(i, j)] -= yi * v;
                    if i != j {
                        s[*b][(j, i)] -= yi * v;
                    }
                }
            }
        }
        if self.sense == Sense::Maximize {
            for sb in &mut s {
                *sb = -&*sb;
            }
        }
        s
    }
}
