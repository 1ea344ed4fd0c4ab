//! Input/output relabelings that leave the winning predicate invariant.
//!
//! Each generator shifts one input digit by one and relabels the answer so
//! that winning events map to winning events:
//!
//! | generator | input      | answer (z < d) | answer (z = d) |
//! |-----------|------------|----------------|----------------|
//! | `ShiftX0` | x₀ → x₀+1  | c − 2z         | c + 1          |
//! | `ShiftX1` | x₁ → x₁+1  | c + 1          | c              |
//! | `ShiftY0` | y₀ → y₀+1  | c + 2z         | c − 1          |
//! | `ShiftY1` | y₁ → y₁+1  | c + 1          | c              |

use serde::{Deserialize, Serialize};

use crate::game::{GameSpec, Pair};
use crate::qobjects::modd;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    ShiftX0,
    ShiftX1,
    ShiftY0,
    ShiftY1,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::ShiftX0, Generator::ShiftX1, Generator::ShiftY0, Generator::ShiftY1];

    /// Answer relabeling applied together with one input shift.
    pub fn answer_shift(self, d: usize, z: usize) -> i64 {
        let (z, last) = (z as i64, z == d);
        match self {
            Generator::ShiftX0 => {
                if last {
                    1
                } else {
                    -2 * z
                }
            }
            Generator::ShiftX1 | Generator::ShiftY1 => {
                if last {
                    0
                } else {
                    1
                }
            }
            Generator::ShiftY0 => {
                if last {
                    -1
                } else {
                    2 * z
                }
            }
        }
    }
}

/// One event `(x, y, c, z)` of the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: Pair,
    pub y: Pair,
    pub c: usize,
    pub z: usize,
}

/// Permutation tables of every generator power on the event set.
#[derive(Debug, Clone)]
pub struct SymmetryActions {
    pub d: usize,
    /// `tables[g][k][i]`: index of generator `g` applied `k` times to event `i`.
    tables: Vec<Vec<Vec<u32>>>,
}

impl SymmetryActions {
    pub fn num_events(&self) -> usize {
        let d = self.d;
        d.pow(5) * (d + 1)
    }

    pub fn event_index(&self, e: &Event) -> usize {
        let d = self.d;
        ((((e.x.0 * d + e.x.1) * d + e.y.0) * d + e.y.1) * (d + 1) + e.z) * d + e.c
    }

    pub fn event(&self, mut i: usize) -> Event {
        let d = self.d;
        let c = i % d;
        i /= d;
        let z = i % (d + 1);
        i /= d + 1;
        let y1 = i % d;
        i /= d;
        let y0 = i % d;
        i /= d;
        let x1 = i % d;
        let x0 = i / d;
        Event { x: (x0, x1), y: (y0, y1), c, z }
    }

    /// Generator `g` applied `power` times (taken mod `d`).
    pub fn apply(&self, g: Generator, power: usize, e: &Event) -> Event {
        let gi = Generator::ALL.iter().position(|&h| h == g).unwrap_or(0);
        self.event(self.tables[gi][power % self.d][self.event_index(e)] as usize)
    }

    pub fn permutation(&self, g: Generator, power: usize) -> &[u32] {
        let gi = Generator::ALL.iter().position(|&h| h == g).unwrap_or(0);
        &self.tables[gi][power % self.d]
    }
}

fn step(d: usize, g: Generator, e: &Event) -> Event {
    let shift = g.answer_shift(d, e.z);
    let c = modd(e.c as i64 + shift, d);
    let inc = |a: usize| (a + 1) % d;
    match g {
        Generator::ShiftX0 => Event { x: (inc(e.x.0), e.x.1), c, ..*e },
        Generator::ShiftX1 => Event { x: (e.x.0, inc(e.x.1)), c, ..*e },
        Generator::ShiftY0 => Event { y: (inc(e.y.0), e.y.1), c, ..*e },
        Generator::ShiftY1 => Event { y: (e.y.0, inc(e.y.1)), c, ..*e },
    }
}

/// Tables of all four generators and their powers `0..d`.
pub fn symmetry_actions(d: usize) -> Result<SymmetryActions> {
    GameSpec::new(d)?;
    let mut actions = SymmetryActions { d, tables: Vec::new() };
    let n = actions.num_events();
    for g in Generator::ALL {
        let once: Vec<u32> = (0..n).map(|i| actions.event_index(&step(d, g, &actions.event(i))) as u32).collect();
        let mut powers = vec![(0..n as u32).collect::<Vec<u32>>()];
        for k in 1..d {
            let prev = &powers[k - 1];
            powers.push(prev.iter().map(|&i| once[i as usize]).collect());
        }
        actions.tables.push(powers);
    }
    Ok(actions)
}
