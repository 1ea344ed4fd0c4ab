use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GameSpec;
use crate::qobjects::modd;
use crate::{Error, Result};

/// Charlie's rule for turning the two messages and `z` into an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    /// The most frequent correct answer for each `(m_A, m_B, z)`, ties to the
    /// smallest outcome.
    BestResponse,
    /// Explicit answers indexed `(m_A·d + m_B)·(d+1) + z`.
    Table(Vec<usize>),
}

/// Deterministic strategy: message tables indexed by the flat input pair
/// `x₀·d + x₁`, plus a decoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    pub decoder: Decoder,
}

impl ClassicalStrategy {
    pub fn validate(&self, spec: &GameSpec) -> Result<()> {
        let d = spec.d;
        for (who, f) in [("Alice", &self.alice), ("Bob", &self.bob)] {
            if f.len() != d * d || f.iter().any(|&m| m >= d) {
                return Err(Error::InvalidArgument(format!("{who}'s encoding must map {} inputs into [{d}]", d * d)));
            }
        }
        if let Decoder::Table(t) = &self.decoder {
            if t.len() != d * d * (d + 1) || t.iter().any(|&c| c >= d) {
                return Err(Error::InvalidArgument("decoder table has the wrong shape".into()));
            }
        }
        Ok(())
    }
}

/// `N(c | m_A, m_B, z)`: number of input pairs with those messages whose
/// correct answer at `z` is `c`, flattened as `((m_A·d + m_B)·(d+1) + z)·d + c`.
pub fn classical_counts(spec: &GameSpec, alice: &[usize], bob: &[usize]) -> Vec<u64> {
    let d = spec.d;
    let mut n = vec![0u64; d * d * (d + 1) * d];
    for x in 0..d * d {
        for y in 0..d * d {
            let (xp, yp) = (spec.pair(x), spec.pair(y));
            let base = (alice[x] * d + bob[y]) * (d + 1);
            for z in 0..=d {
                n[(base + z) * d + spec.win(xp, yp, z)] += 1;
            }
        }
    }
    n
}

/// Best-response decoder table for fixed encodings.
pub fn best_response(spec: &GameSpec, alice: &[usize], bob: &[usize]) -> Vec<usize> {
    let d = spec.d;
    classical_counts(spec, alice, bob)
        .chunks(d)
        .map(|row| {
            let mut best = 0;
            for c in 1..d {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Number of winning `(x, y, z)` triples.
pub fn classical_wins(spec: &GameSpec, strategy: &ClassicalStrategy) -> Result<u64> {
    strategy.validate(spec)?;
    let d = spec.d;
    let counts = classical_counts(spec, &strategy.alice, &strategy.bob);
    let wins = match &strategy.decoder {
        Decoder::BestResponse => counts.chunks(d).map(|row| row.iter().copied().max().unwrap_or(0)).sum(),
        Decoder::Table(t) => counts.chunks(d).zip(t).map(|(row, &c)| row[c]).sum(),
    };
    Ok(wins)
}

pub fn score_classical(spec: &GameSpec, strategy: &ClassicalStrategy) -> Result<f64> {
    Ok(classical_wins(spec, strategy)? as f64 / spec.num_triples() as f64)
}

/// Relabels messages in order of first appearance. Two encodings differ by a
/// message permutation iff their canonical forms agree.
pub fn canonical_encoding(f: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    f.iter()
        .map(|&m| {
            if m >= map.len() {
                map.resize(m + 1, None);
            }
            *map[m].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// All restricted growth strings of length `len` using at most `max_blocks`
/// symbols, in lexicographic order.
pub fn restricted_growth_strings(len: usize, max_blocks: usize) -> Vec<Vec<u8>> {
    fn extend(prefix: &mut Vec<u8>, used: usize, len: usize, max_blocks: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        let limit = (used + 1).min(max_blocks);
        for s in 0..limit {
            prefix.push(s as u8);
            extend(prefix, used.max(s + 1), len, max_blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if len == 0 {
        out.push(Vec::new());
    } else if max_blocks > 0 {
        extend(&mut Vec::with_capacity(len), 0, len, max_blocks, &mut out);
    }
    out
}

/// Exact optimum over deterministic strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalMax {
    pub d: usize,
    /// Winning triples of the best strategy.
    pub wins: u64,
    pub total: u64,
    pub value: f64,
    /// Encodings up to message relabeling, per party.
    pub classes: usize,
    /// Ordered class pairs attaining the optimum.
    pub maximizing_pairs: u64,
    /// Whether sending `m_A = x₀`, `m_B = y₀` attains the optimum.
    pub first_digit_optimal: bool,
    pub witness: ClassicalStrategy,
}

/// Histograms `h_z(m, t)` of an encoding over the linear form `t` that enters
/// the winning answer additively, flattened `(z·d + m)·d + t`.
fn histograms(spec: &GameSpec, f: &[u8], alice: bool) -> Vec<u16> {
    let d = spec.d;
    let mut h = vec![0u16; (d + 1) * d * d];
    for (i, &m) in f.iter().enumerate() {
        let (a0, a1) = spec.pair(i);
        let (a0, a1) = (a0 as i64, a1 as i64);
        for z in 0..=d {
            let zi = z as i64;
            let t = match (z == d, alice) {
                (true, true) => modd(a0, d),
                (true, false) => modd(-a0, d),
                (false, true) => modd(a1 - 2 * zi * a0, d),
                (false, false) => modd(a1 + 2 * zi * a0, d),
            };
            h[(z * d + m as usize) * d + t] += 1;
        }
    }
    h
}

/// Best-response wins of a class pair: `Σ_z Σ_{m_A,m_B} max_c Σ_t h^A_z(m_A,t)
/// h^B_z(m_B, c − t)`.
fn pair_wins(d: usize, ha: &[u16], hb: &[u16]) -> u64 {
    let mut wins = 0u64;
    for z in 0..=d {
        for ma in 0..d {
            let ra = &ha[(z * d + ma) * d..(z * d + ma + 1) * d];
            if ra.iter().all(|&v| v == 0) {
                continue;
            }
            for mb in 0..d {
                let rb = &hb[(z * d + mb) * d..(z * d + mb + 1) * d];
                let mut best = 0u32;
                for c in 0..d {
                    let mut n = 0u32;
                    for t in 0..d {
                        n += ra[t] as u32 * rb[(c + d - t) % d] as u32;
                    }
                    best = best.max(n);
                }
                wins += best as u64;
            }
        }
    }
    wins
}

/// Exact classical optimum for `d = 3` by enumerating all pairs of
/// encodings modulo message relabeling (which the best-response decoder
/// absorbs).
pub fn classical_exact_max(d: usize) -> Result<ClassicalMax> {
    if d != 3 {
        return Err(Error::Unsupported { d, reason: "exact classical enumeration is limited to d = 3".into() });
    }
    let spec = GameSpec::new(d)?;
    let classes = restricted_growth_strings(d * d, d);
    let ha: Vec<Vec<u16>> = classes.iter().map(|f| histograms(&spec, f, true)).collect();
    let hb: Vec<Vec<u16>> = classes.iter().map(|f| histograms(&spec, f, false)).collect();

    // per Alice class: (best wins, first Bob class attaining it, number of Bob classes attaining it)
    let per_alice: Vec<(u64, usize, u64)> = ha
        .par_iter()
        .map(|a| {
            let mut best = (0u64, 0usize, 0u64);
            for (j, b) in hb.iter().enumerate() {
                let w = pair_wins(d, a, b);
                if w > best.0 {
                    best = (w, j, 1);
                } else if w == best.0 {
                    best.2 += 1;
                }
            }
            best
        })
        .collect();
    let wins = per_alice.iter().map(|p| p.0).max().unwrap_or(0);
    let maximizing_pairs = per_alice.iter().filter(|p| p.0 == wins).map(|p| p.2).sum();
    let (ia, &(_, ib, _)) = per_alice.iter().enumerate().find(|(_, p)| p.0 == wins).expect("nonempty class list");

    let first_digit = |i: usize| i / d;
    let fa: Vec<usize> = canonical_encoding(&(0..d * d).map(first_digit).collect::<Vec<_>>());
    let pos = |f: &[usize]| classes.iter().position(|c| c.iter().zip(f).all(|(&a, &b)| a as usize == b));
    let digit_pair = pos(&fa).map(|i| (i, i));
    let first_digit_optimal = digit_pair.is_some_and(|(i, j)| pair_wins(d, &ha[i], &hb[j]) == wins);

    let (ia, ib) = if first_digit_optimal { digit_pair.expect("checked above") } else { (ia, ib) };
    let alice: Vec<usize> = classes[ia].iter().map(|&m| m as usize).collect();
    let bob: Vec<usize> = classes[ib].iter().map(|&m| m as usize).collect();
    let decoder = Decoder::Table(best_response(&spec, &alice, &bob));
    let total = spec.num_triples() as u64;
    Ok(ClassicalMax {
        d,
        wins,
        total,
        value: wins as f64 / total as f64,
        classes: classes.len(),
        maximizing_pairs,
        first_digit_optimal,
        witness: ClassicalStrategy { alice, bob, decoder },
    })
}
