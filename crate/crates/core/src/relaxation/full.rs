//! The moment matrix before symmetrization, over the monomials
//! `Π, ρ_x⊗1, 1⊗σ_y, M_{c|z}, (ρ_x⊗1)M_{c|z}`.
//!
//! Entries are real parts of traces of words. A word is reduced with the
//! rules of pure states and projective measurements (idempotence, orthogonal
//! outcomes, `ρ` commuting with `σ`), the last outcome is eliminated through
//! completeness, and what remains is canonicalized under cyclic rotation and
//! reversal. Every distinct canonical word is one real unknown.

use std::collections::BTreeMap;

use boundent_sdp::{solve, BlockSpec, ConicProgram, Sense, SolverOptions, SparseSym};
use serde::{Deserialize, Serialize};

use crate::error::check_solution;
use crate::game::GameSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    /// `ρ_x ⊗ 1`.
    R(u8),
    /// `1 ⊗ σ_y`.
    S(u8),
    /// `M_{c|z}`.
    M { c: u8, z: u8 },
}

pub type Word = Vec<Letter>;

/// Value of a reduced word trace.
#[derive(Debug, Clone, PartialEq)]
enum Reduced {
    Zero,
    Const(f64),
    /// Coefficient times an unknown.
    Var(f64, Word),
}

/// Monomials indexing rows and columns, in order.
#[derive(Debug, Clone)]
pub struct MonomialIndex {
    pub d: usize,
    pub monomials: Vec<Word>,
}

impl MonomialIndex {
    pub fn new(d: usize) -> Self {
        let n = d * d;
        let mut monomials: Vec<Word> = vec![Vec::new()];
        monomials.extend((0..n).map(|x| vec![Letter::R(x as u8)]));
        monomials.extend((0..n).map(|y| vec![Letter::S(y as u8)]));
        let measure = |c: usize, z: usize| Letter::M { c: c as u8, z: z as u8 };
        for z in 0..=d {
            for c in 0..d {
                monomials.push(vec![measure(c, z)]);
            }
        }
        for x in 0..n {
            for z in 0..=d {
                for c in 0..d {
                    monomials.push(vec![Letter::R(x as u8), measure(c, z)]);
                }
            }
        }
        MonomialIndex { d, monomials }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }
}

/// Removes cyclically adjacent repeats of a sequence of projectors.
fn dedup_cyclic<T: PartialEq + Copy>(seq: &mut Vec<T>) {
    seq.dedup();
    while seq.len() > 1 && seq.first() == seq.last() {
        seq.pop();
    }
}

/// Smallest rotation of `seq` or of its reverse.
fn min_rotation<T: Ord + Clone>(seq: &[T]) -> Vec<T> {
    let n = seq.len();
    let mut best: Option<Vec<T>> = None;
    let rev: Vec<T> = seq.iter().rev().cloned().collect();
    for s in [seq.to_vec(), rev] {
        for k in 0..n.max(1) {
            let mut r = s.clone();
            r.rotate_left(k);
            if best.as_ref().is_none_or(|b| r < *b) {
                best = Some(r);
            }
        }
    }
    best.unwrap_or_default()
}

/// Trace of a word without measurements, which factorizes as
/// `tr(ρ-part) · tr(σ-part)`.
fn reduce_states(d: usize, word: &[Letter]) -> Reduced {
    let mut rs: Vec<Letter> = word.iter().copied().filter(|l| matches!(l, Letter::R(_))).collect();
    let mut ss: Vec<Letter> = word.iter().copied().filter(|l| matches!(l, Letter::S(_))).collect();
    dedup_cyclic(&mut rs);
    dedup_cyclic(&mut ss);
    let df = d as f64;
    match (rs.len(), ss.len()) {
        (0, 0) => Reduced::Const(df * df),
        (1, 0) | (0, 1) => Reduced::Const(df),
        (1, 1) => Reduced::Const(1.0),
        (_, 0) => Reduced::Var(1.0, min_rotation(&rs)),
        (0, _) => Reduced::Var(1.0, min_rotation(&ss)),
        // tr(ρ…)·tr(σ) with a single pure σ equals tr(ρ… ⊗ 1)/d
        (_, 1) => Reduced::Var(1.0 / df, min_rotation(&rs)),
        (1, _) => Reduced::Var(1.0 / df, min_rotation(&ss)),
        _ => {
            let (a, b) = (min_rotation(&rs), min_rotation(&ss));
            Reduced::Var(1.0, a.into_iter().chain(b).collect())
        }
    }
}

/// Splits a word starting with a measurement into `(M, run)` pairs, where a
/// run is the `ρ` part followed by the `σ` part of the letters up to the
/// next measurement.
fn segments(word: &[Letter]) -> Vec<(Letter, Word)> {
    let mut out: Vec<(Letter, Word)> = Vec::new();
    for &l in word {
        match l {
            Letter::M { .. } => out.push((l, Vec::new())),
            _ => out.last_mut().expect("word starts with a measurement").1.push(l),
        }
    }
    for (_, run) in &mut out {
        let mut rs: Word = run.iter().copied().filter(|l| matches!(l, Letter::R(_))).collect();
        let mut ss: Word = run.iter().copied().filter(|l| matches!(l, Letter::S(_))).collect();
        rs.dedup();
        ss.dedup();
        rs.extend(ss);
        *run = rs;
    }
    out
}

fn flatten(segs: &[(Letter, Word)]) -> Word {
    segs.iter().flat_map(|(m, run)| std::iter::once(*m).chain(run.iter().copied())).collect()
}

/// Reduced form of a word that contains at least one measurement, rotated
/// to start with one.
fn reduce_measured(word: &[Letter]) -> Option<Word> {
    let first = word.iter().position(|l| matches!(l, Letter::M { .. }))?;
    let mut w = word.to_vec();
    w.rotate_left(first);
    let mut segs = segments(&w);
    loop {
        let k = segs.len();
        let mut changed = false;
        for i in 0..k {
            let j = (i + 1) % k;
            if !segs[i].1.is_empty() || (k == 1 && i == j) {
                continue;
            }
            match (segs[i].0, segs[j].0) {
                (a, b) if a == b => {
                    // M M = M: drop the second and keep its run
                    let run = segs[j].1.clone();
                    segs[i].1 = run;
                    segs.remove(j);
                    changed = true;
                    break;
                }
                (Letter::M { z: za, .. }, Letter::M { z: zb, .. }) if za == zb => return None,
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    Some(flatten(&segs))
}

/// Canonical representative of a measured word: the least over rotations
/// to a measurement and over reversal, each re-reduced.
fn canonical_measured(word: &[Letter]) -> Option<Word> {
    let w = reduce_measured(word)?;
    let rev: Word = w.iter().rev().copied().collect();
    let w_rev = reduce_measured(&rev)?;
    let mut best: Option<Word> = None;
    for cand in [w, w_rev] {
        for k in 0..cand.len() {
            if !matches!(cand[k], Letter::M { .. }) {
                continue;
            }
            let mut r = cand.clone();
            r.rotate_left(k);
            let r = reduce_measured(&r)?;
            if best.as_ref().is_none_or(|b| r < *b) {
                best = Some(r);
            }
        }
    }
    best
}

fn reduce(d: usize, word: &[Letter]) -> Reduced {
    if word.iter().any(|l| matches!(l, Letter::M { .. })) {
        match canonical_measured(word) {
            Some(w) => Reduced::Var(1.0, w),
            None => Reduced::Zero,
        }
    } else {
        reduce_states(d, word)
    }
}

/// `M_{d−1|z} = Π − Σ_{c<d−1} M_{c|z}` applied to every occurrence.
fn expand_last_outcome(d: usize, word: &[Letter]) -> Vec<(f64, Word)> {
    let mut terms: Vec<(f64, Word)> = vec![(1.0, Vec::new())];
    let last = (d - 1) as u8;
    for &l in word {
        let mut next = Vec::with_capacity(terms.len() * d);
        for (coef, w) in &terms {
            match l {
                Letter::M { c, z } if c == last => {
                    next.push((*coef, w.clone()));
                    for c2 in 0..last {
                        let mut w2 = w.clone();
                        w2.push(Letter::M { c: c2, z });
                        next.push((-coef, w2));
                    }
                }
                _ => {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.push((*coef, w2));
                }
            }
        }
        terms = next;
    }
    terms
}

/// Affine expression `constant + Σ coef · unknown`.
#[derive(Debug, Clone, Default)]
struct Affine {
    constant: f64,
    terms: BTreeMap<Word, f64>,
}

fn trace_of(d: usize, word: &[Letter]) -> Affine {
    let mut out = Affine::default();
    for (coef, w) in expand_last_outcome(d, word) {
        match reduce(d, &w) {
            Reduced::Zero => {}
            Reduced::Const(v) => out.constant += coef * v,
            Reduced::Var(s, key) => *out.terms.entry(key).or_default() += coef * s,
        }
    }
    out.terms.retain(|_, v| *v != 0.0);
    out
}

/// `Γ(v) = F₀ + Σ_w v_w F_w` and the score `s₀ + Σ_w a_w v_w`.
#[derive(Debug, Clone)]
pub struct FullMomentModel {
    pub d: usize,
    pub index: MonomialIndex,
    /// Canonical words, one per unknown.
    pub words: Vec<Word>,
    pub constant: SparseSym,
    pub coefficients: Vec<SparseSym>,
    pub objective_constant: f64,
    pub objective: Vec<f64>,
}

impl FullMomentModel {
    pub fn new(d: usize) -> Result<Self> {
        if d != 3 {
            return Err(Error::Unsupported { d, reason: "the unsymmetrized moment matrix is built for d = 3 only".into() });
        }
        let spec = GameSpec::new(d)?;
        let index = MonomialIndex::new(d);
        let n = index.len();
        let mut constant = Vec::new();
        let mut per_word: BTreeMap<Word, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                // tr(u v†) with Hermitian letters
                let word: Word =
                    index.monomials[i].iter().copied().chain(index.monomials[j].iter().rev().copied()).collect();
                let e = trace_of(d, &word);
                if e.constant != 0.0 {
                    constant.push((i, j, e.constant));
                }
                for (w, c) in e.terms {
                    per_word.entry(w).or_default().push((i, j, c));
                }
            }
        }

        let mut objective_terms: BTreeMap<Word, f64> = BTreeMap::new();
        let mut objective_constant = 0.0;
        let norm = spec.num_triples() as f64;
        for x in 0..d * d {
            for y in 0..d * d {
                for z in 0..=d {
                    let c = spec.win(spec.pair(x), spec.pair(y), z);
                    let word = [Letter::R(x as u8), Letter::S(y as u8), Letter::M { c: c as u8, z: z as u8 }];
                    let e = trace_of(d, &word);
                    objective_constant += e.constant / norm;
                    for (w, v) in e.terms {
                        *objective_terms.entry(w).or_default() += v / norm;
                    }
                }
            }
        }
        if let Some(w) = objective_terms.keys().find(|w| !per_word.contains_key(*w)) {
            return Err(Error::InvalidArgument(format!("score uses {w:?}, which is not an entry of the moment matrix")));
        }

        let words: Vec<Word> = per_word.keys().cloned().collect();
        let objective = words.iter().map(|w| objective_terms.get(w).copied().unwrap_or(0.0)).collect();
        let coefficients = per_word.into_values().map(SparseSym::from_triplets).collect();
        Ok(FullMomentModel {
            d,
            index,
            words,
            constant: SparseSym::from_triplets(constant),
            coefficients,
            objective_constant,
            objective,
        })
    }

    pub fn size(&self) -> usize {
        self.index.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.words.len()
    }

    /// `min ⟨F₀, Y⟩ s.t. ⟨F_w, Y⟩ = −a_w, Y ⪰ 0`, whose dual is the moment
    /// problem with `v = −y`.
    pub fn program(&self) -> ConicProgram {
        let mut p = ConicProgram::new(Sense::Minimize, vec![BlockSpec::psd(self.size())]);
        p.set_objective(0, self.constant.clone());
        for (f, &a) in self.coefficients.iter().zip(&self.objective) {
            p.add_constraint(vec![(0, f.clone())], -a);
        }
        p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullSolution {
    pub d: usize,
    /// Upper bound from the primal side of the moment problem.
    pub value: f64,
    /// Value of the semidefinite side, `s₀ + ⟨F₀, Y⟩`.
    pub dual_value: f64,
    pub size: usize,
    pub unknowns: usize,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the unsymmetrized relaxation (`d = 3`).
pub fn solve_full(d: usize, solver_tol: f64) -> Result<FullSolution> {
    let model = FullMomentModel::new(d)?;
    let sol = solve(&model.program(), &SolverOptions::with_tol(solver_tol))?;
    check_solution(&sol, solver_tol, "full moment relaxation")?;
    Ok(FullSolution {
        d,
        value: model.objective_constant + sol.dual_value,
        dual_value: model.objective_constant + sol.primal_value,
        size: model.size(),
        unknowns: model.num_unknowns(),
        gap: sol.gap,
        iterations: sol.iterations,
    })
}
