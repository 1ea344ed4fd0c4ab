//! SDPA sparse format (`.dat-s`).
//!
//! SDPA solves `min c·x  s.t.  Σ F_i x_i - F_0 ⪰ 0` together with its dual
//! `max ⟨F_0, Y⟩  s.t.  ⟨F_i, Y⟩ = c_i, Y ⪰ 0`. A [`ConicProgram`] maps onto the
//! dual side with `F_i = A_i` and `c = b`. Maximization uses `F_0 = C`, so the
//! SDPA optimum equals the program optimum; minimization uses `F_0 = -C`, and
//! the SDPA optimum is the negated program optimum. The exported header
//! records which case applies so that [`parse_sdpa`] can restore the sense.

use std::fmt::Write as _;
use std::path::Path;

use crate::{BlockKind, BlockSpec, ConicProgram, SdpError, Sense, SparseSym};

const SENSE_TAG: &str = "* sense:";

pub fn write_sdpa(p: &ConicProgram) -> String {
    let mut out = String::new();
    let (sense_name, note) = match p.sense {
        Sense::Maximize => ("maximize", "F0 = C; the SDPA optimum equals the program optimum"),
        Sense::Minimize => ("minimize", "F0 = -C; the SDPA optimum is the negated program optimum"),
    };
    let _ = writeln!(out, "* boundent conic program");
    let _ = writeln!(out, "{SENSE_TAG} {sense_name}");
    let _ = writeln!(out, "* {note}");
    let _ = writeln!(out, "{}", p.constraints.len());
    let _ = writeln!(out, "{}", p.blocks.len());
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::Diagonal => format!("-{}", b.size),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = p.constraints.iter().map(|c| format!("{:e}", c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let f0_sign = match p.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    for (blk, c) in p.objective.iter().enumerate() {
        for &(i, j, v) in c.entries() {
            let _ = writeln!(out, "0 {} {} {} {:e}", blk + 1, i + 1, j + 1, f0_sign * v);
        }
    }
    for (k, con) in p.constraints.iter().enumerate() {
        for (blk, a) in &con.terms {
            for &(i, j, v) in a.entries() {
                let _ = writeln!(out, "{} {} {} {} {:e}", k + 1, blk + 1, i + 1, j + 1, v);
            }
        }
    }
    out
}

pub fn export_sdpa(p: &ConicProgram, path: impl AsRef<Path>) -> Result<(), SdpError> {
    p.validate()?;
    std::fs::write(path, write_sdpa(p))?;
    Ok(())
}

pub fn read_sdpa(path: impl AsRef<Path>) -> Result<ConicProgram, SdpError> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> SdpError {
    SdpError::Parse { line, message: message.into() }
}

fn clean(line: &str) -> String {
    line.chars().map(|ch| if "{}(),".contains(ch) { ' ' } else { ch }).collect()
}

/// Parses SDPA sparse text. Programs without a `* sense:` header are read as
/// maximization with `C = F_0`.
pub fn parse_sdpa(text: &str) -> Result<ConicProgram, SdpError> {
    let mut sense = Sense::Maximize;
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix(SENSE_TAG) {
            sense = match rest.trim() {
                "minimize" => Sense::Minimize,
                "maximize" => Sense::Maximize,
                other => return Err(parse_err(no + 1, format!("unknown sense '{other}'"))),
            };
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('*') || trimmed.starts_with('"') {
            continue;
        }
        lines.push((no + 1, clean(trimmed)));
    }
    let mut it = lines.into_iter();

    let mut header_int = |what: &str| -> Result<(usize, i64), SdpError> {
        let (no, line) = it.next().ok_or_else(|| parse_err(0, format!("missing {what}")))?;
        let tok = line.split_whitespace().next().ok_or_else(|| parse_err(no, format!("missing {what}")))?;
        let v = tok.parse::<i64>().map_err(|_| parse_err(no, format!("bad {what} '{tok}'")))?;
        Ok((no, v))
    };
    let (no_m, m) = header_int("constraint count")?;
    let (no_nb, nblocks) = header_int("block count")?;
    if m < 0 {
        return Err(parse_err(no_m, "negative constraint count"));
    }
    if nblocks <= 0 {
        return Err(parse_err(no_nb, "block count must be positive"));
    }
    let (m, nblocks) = (m as usize, nblocks as usize);

    // Remaining lines as a token stream; block sizes and c may wrap lines.
    let rest: Vec<(usize, String)> = it.collect();
    let mut tokens = rest.iter().flat_map(|(no, l)| l.split_whitespace().map(move |t| (*no, t)));

    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (no, tok) = tokens.next().ok_or_else(|| parse_err(no_nb, "missing block sizes"))?;
        let s: i64 = tok.parse().map_err(|_| parse_err(no, format!("bad block size '{tok}'")))?;
        blocks.push(if s < 0 { BlockSpec::diagonal((-s) as usize) } else { BlockSpec::psd(s as usize) });
    }
    let mut rhs = Vec::with_capacity(m);
    let mut last_line = no_nb;
    for _ in 0..m {
        let (no, tok) = tokens.next().ok_or_else(|| parse_err(no_nb, "missing objective vector"))?;
        rhs.push(tok.parse::<f64>().map_err(|_| parse_err(no, format!("bad number '{tok}'")))?);
        last_line = no;
    }

    let mut f: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![vec![Vec::new(); nblocks]; m + 1];
    let remaining: Vec<(usize, &str)> = tokens.collect();
    if remaining.len() % 5 != 0 {
        let line = remaining.last().map(|t| t.0).unwrap_or(last_line);
        return Err(parse_err(line, "entry list is not a sequence of 5-tuples"));
    }
    for chunk in remaining.chunks(5) {
        let no = chunk[0].0;
        let int = |k: usize| -> Result<usize, SdpError> {
            chunk[k].1.parse::<usize>().map_err(|_| parse_err(no, format!("bad index '{}'", chunk[k].1)))
        };
        let (mat, blk, i, j) = (int(0)?, int(1)?, int(2)?, int(3)?);
        let v: f64 = chunk[4].1.parse().map_err(|_| parse_err(no, format!("bad value '{}'", chunk[4].1)))?;
        if mat > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(parse_err(no, "entry index out of range"));
        }
        let size = blocks[blk - 1].size;
        if i > size || j > size {
            return Err(parse_err(no, format!("entry ({i},{j}) outside block {blk} of size {size}")));
        }
        f[mat][blk - 1].push((i - 1, j - 1, v));
    }

    let mut p = ConicProgram::new(sense, blocks);
    let c_sign = match sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    for (blk, entries) in f[0].iter().enumerate() {
        p.set_objective(blk, SparseSym::from_triplets(entries.iter().map(|&(i, j, v)| (i, j, c_sign * v))));
    }
    for (k, rhs_k) in rhs.into_iter().enumerate() {
        let terms = f[k + 1]
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(blk, e)| (blk, SparseSym::from_triplets(e.iter().copied())))
            .collect();
        p.add_constraint(terms, rhs_k);
    }
    p.validate()?;
    Ok(p)
}
