//! Symmetrized minor of the moment matrix.
//!
//! Rows are the `d²` states `σ_y` followed by the `d³(d+1)` products
//! `(ρ_x ⊗ 1) M_{c|z}`. After averaging over the relabeling group every
//! entry is one of a handful of symbols, and only `Δ_ρ`, `Δ_σ` and the
//! grouped probabilities `q(c̃|z)` stay unknown.

use std::collections::BTreeMap;

use boundent_sdp::SparseSym;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use boundent_linalg::Ket;

use crate::game::{GameSpec, Pair};
use crate::qobjects::{modd, Povm};
use crate::{Error, Result};

/// Value class of one entry of the symmetrized minor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    /// The constant `d`.
    D,
    One,
    Zero,
    /// Averaged overlap `tr(ρ_x ρ_x')`, `x ≠ x'`.
    DeltaRho,
    /// `d · Δ_σ`.
    DDeltaSigma,
    /// `Δ_ρ / d`.
    DeltaRhoOverD,
    /// The constant `1/d`.
    OneOverD,
    /// Probability of answering `w_z + miss` for input `z`, averaged over the
    /// other inputs.
    Q { miss: usize, z: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Sigma(usize),
    Measure { x: usize, c: usize, z: usize },
}

/// Values of the unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub delta_rho: f64,
    pub delta_sigma: f64,
    /// `q[z][miss]`.
    pub q: Vec<Vec<f64>>,
}

impl Assignment {
    /// `(1/(d+1)) Σ_z q(0|z)`.
    pub fn winning_average(&self) -> f64 {
        self.q.iter().map(|row| row[0]).sum::<f64>() / self.q.len() as f64
    }

    pub fn value_of(&self, d: usize, s: Symbol) -> f64 {
        let df = d as f64;
        match s {
            Symbol::D => df,
            Symbol::One => 1.0,
            Symbol::Zero => 0.0,
            Symbol::DeltaRho => self.delta_rho,
            Symbol::DDeltaSigma => df * self.delta_sigma,
            Symbol::DeltaRhoOverD => self.delta_rho / df,
            Symbol::OneOverD => 1.0 / df,
            Symbol::Q { miss, z } => self.q[z][miss],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedMomentModel {
    pub d: usize,
    pub size: usize,
    /// Distinct symbols in a fixed order.
    pub symbols: Vec<Symbol>,
    /// 0/1 position matrix of every symbol, same order as `symbols`.
    pub structure: Vec<SparseSym>,
}

/// Symbol of the entry between rows `r` and `s`.
pub fn symbol_at(d: usize, r: Row, s: Row) -> Symbol {
    let pair = |i: usize| -> Pair { (i / d, i % d) };
    match (r, s) {
        (Row::Sigma(y), Row::Sigma(y2)) => {
            if y == y2 {
                Symbol::D
            } else {
                Symbol::DDeltaSigma
            }
        }
        (Row::Sigma(y), Row::Measure { x, c, z }) | (Row::Measure { x, c, z }, Row::Sigma(y)) => {
            let w = GameSpec { d }.win(pair(x), pair(y), z);
            Symbol::Q { miss: modd(c as i64 - w as i64, d), z }
        }
        (Row::Measure { x, c, z }, Row::Measure { x: x2, c: c2, z: z2 }) => {
            if z == z2 {
                if c != c2 {
                    Symbol::Zero
                } else if x == x2 {
                    Symbol::One
                } else {
                    Symbol::DeltaRho
                }
            } else if x == x2 {
                Symbol::OneOverD
            } else {
                Symbol::DeltaRhoOverD
            }
        }
    }
}

impl ReducedMomentModel {
    pub fn new(d: usize) -> Result<Self> {
        if ![3, 5, 7].contains(&d) {
            return Err(Error::Unsupported { d, reason: "the reduced relaxation is built for d = 3, 5, 7".into() });
        }
        let size = d * d + d * d * d * (d + 1);
        let mut positions: BTreeMap<Symbol, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let model_rows: Vec<Row> = (0..size).map(|i| row_of(d, i)).collect();
        for i in 0..size {
            for j in i..size {
                positions.entry(symbol_at(d, model_rows[i], model_rows[j])).or_default().push((i, j, 1.0));
            }
        }
        let (symbols, structure) = positions.into_iter().map(|(s, t)| (s, SparseSym::from_triplets(t))).unzip();
        Ok(ReducedMomentModel { d, size, symbols, structure })
    }

    pub fn row(&self, i: usize) -> Row {
        row_of(self.d, i)
    }

    pub fn index(&self, r: Row) -> usize {
        let d = self.d;
        match r {
            Row::Sigma(y) => y,
            Row::Measure { x, c, z } => d * d + (x * (d + 1) + z) * d + c,
        }
    }

    /// `d(d+1) + 2`.
    pub fn num_unknowns(&self) -> usize {
        self.symbols.iter().filter(|s| matches!(s, Symbol::DeltaRho | Symbol::DDeltaSigma | Symbol::Q { .. })).count()
    }

    pub fn structure_of(&self, s: Symbol) -> Option<&SparseSym> {
        self.symbols.iter().position(|&t| t == s).map(|k| &self.structure[k])
    }

    /// The minor for a given assignment.
    pub fn assemble(&self, a: &Assignment) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.size, self.size);
        for (s, x) in self.symbols.iter().zip(&self.structure) {
            let v = a.value_of(self.d, *s);
            for &(i, j, _) in x.entries() {
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Trace of the minor, which does not depend on the unknowns.
    pub fn trace(&self) -> f64 {
        let d = self.d as f64;
        d * d * d + d * d * d * (d + 1.0)
    }
}

fn row_of(d: usize, i: usize) -> Row {
    if i < d * d {
        Row::Sigma(i)
    } else {
        let k = i - d * d;
        let c = k % d;
        let rest = k / d;
        Row::Measure { x: rest / (d + 1), z: rest % (d + 1), c }
    }
}

/// Grouped probabilities `q(c̃|z)` from a full table `p(c|x,y,z)` indexed as
/// `((x·d² + y)(d+1) + z)·d + c`.
pub fn group_probabilities(d: usize, p: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = d * d;
    if p.len() != n * n * (d + 1) * d {
        return Err(Error::InvalidArgument(format!("expected {} probabilities, got {}", n * n * (d + 1) * d, p.len())));
    }
    let spec = GameSpec::new(d)?;
    let mut q = vec![vec![0.0; d]; d + 1];
    for x in 0..n {
        for y in 0..n {
            for (z, qz) in q.iter_mut().enumerate() {
                let w = spec.win(spec.pair(x), spec.pair(y), z);
                let base = ((x * n + y) * (d + 1) + z) * d;
                for (miss, slot) in qz.iter_mut().enumerate() {
                    *slot += p[base + (w + miss) % d];
                }
            }
        }
    }
    let norm = (n * n) as f64;
    q.iter_mut().flatten().for_each(|v| *v /= norm);
    Ok(q)
}

/// Unknowns realized by a product strategy with pure states: `q` from the
/// outcome statistics, `Δ_ρ` and `Δ_σ` as mean overlaps of distinct states.
pub fn assignment_from_product(d: usize, alice: &[Ket], bob: &[Ket], measurements: &[Povm]) -> Result<Assignment> {
    GameSpec::new(d)?;
    let n = d * d;
    if alice.len() != n || bob.len() != n || measurements.len() != d + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {n} states per party and {} measurements, got {}, {}, {}",
            d + 1,
            alice.len(),
            bob.len(),
            measurements.len()
        )));
    }
    let overlap = |kets: &[Ket]| {
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += kets[i].dotc(&kets[j]).norm_sqr();
                }
            }
        }
        total / (n * (n - 1)) as f64
    };
    let mut p = vec![0.0; n * n * (d + 1) * d];
    for x in 0..n {
        for y in 0..n {
            let v = Ket::from_fn(n, |i, _| alice[x][i / d] * bob[y][i % d]);
            for (z, m) in measurements.iter().enumerate() {
                for (c, e) in m.effects.iter().enumerate() {
                    p[((x * n + y) * (d + 1) + z) * d + c] = v.dotc(&e.apply(&v)).re;
                }
            }
        }
    }
    Ok(Assignment { delta_rho: overlap(alice), delta_sigma: overlap(bob), q: group_probabilities(d, &p)? })
}
