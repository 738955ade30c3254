//! SDPA sparse format (`.dat-s`) and CSDP-style solution files.
//!
//! SDPA states the primal as `min cᵀx` subject to `Σ_i F_i x_i − F₀ ⪰ 0`.
//! A [`ConicProgram`] maps onto it with `F_i = A_i`, `c = b`, `F₀ = −C` and
//! `x = −y`, so SDPA's primal is this crate's dual.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{Block, BlockKind, ConicProgram, Entry, Solution, Status};
use crate::{Error, Result};

/// Shortest round-trip decimal; exponent notation outside `[1e-4, 1e15)`.
pub fn format_sdpa_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Serializes a program in SDPA sparse format.
///
/// The output is canonical: entries are sorted by matrix, block and
/// position, so parsing and re-emitting reproduces it byte for byte.
pub fn emit_sdpa(program: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", program.num_constraints());
    let _ = writeln!(out, "{}", program.blocks().len());
    let sizes: Vec<String> = program
        .blocks()
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::Diag => format!("-{}", b.size),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = program.rhs().iter().map(|&v| format_sdpa_float(v)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    let mut line = |mat: usize, e: &Entry, value: f64| {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            mat,
            e.block + 1,
            e.i + 1,
            e.j + 1,
            format_sdpa_float(value)
        );
    };
    for e in program.objective() {
        line(0, e, -e.value);
    }
    for (k, a) in program.constraints().iter().enumerate() {
        for e in a {
            line(k + 1, e, e.value);
        }
    }
    out
}

/// Whitespace tokens tagged with 1-based line numbers. Leading lines
/// starting with `"` or `*` are comments; `{ } ( ) ,` act as separators.
fn tokens(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut header = true;
    for (n, raw) in text.lines().enumerate() {
        let t = raw.trim_start();
        if header && (t.starts_with('"') || t.starts_with('*')) {
            continue;
        }
        if !t.is_empty() {
            header = false;
        }
        let cleaned: String = raw.chars().map(|c| if "{}(),".contains(c) { ' ' } else { c }).collect();
        out.extend(cleaned.split_whitespace().map(|w| (n + 1, w.to_string())));
    }
    out
}

struct Cursor {
    toks: Vec<(usize, String)>,
    pos: usize,
}

impl Cursor {
    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, T)> {
        let last_line = self.toks.last().map_or(1, |t| t.0);
        let (line, tok) = self
            .toks
            .get(self.pos)
            .ok_or_else(|| Error::parse(last_line, format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        tok.parse::<T>()
            .map(|v| (*line, v))
            .map_err(|_| Error::parse(*line, format!("expected {what}, found `{tok}`")))
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// Parses SDPA sparse format into a program.
pub fn parse_sdpa(text: &str) -> Result<ConicProgram> {
    let mut cur = Cursor {
        toks: tokens(text),
        pos: 0,
    };
    let (_, m) = cur.next::<usize>("constraint count")?;
    let (line, nblocks) = cur.next::<usize>("block count")?;
    if nblocks == 0 {
        return Err(Error::parse(line, "block count must be positive"));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (line, s) = cur.next::<i64>("block size")?;
        blocks.push(match s {
            0 => return Err(Error::parse(line, "block size zero")),
            s if s > 0 => Block::psd(s as usize),
            s => Block::diag(s.unsigned_abs() as usize),
        });
    }
    let mut b = Vec::with_capacity(m);
    for _ in 0..m {
        b.push(cur.next::<f64>("objective coefficient")?.1);
    }
    let mut c = Vec::new();
    let mut a: Vec<Vec<Entry>> = vec![Vec::new(); m];
    while !cur.done() {
        let (line, mat) = cur.next::<usize>("matrix number")?;
        let (_, blk) = cur.next::<usize>("block number")?;
        let (_, i) = cur.next::<usize>("row index")?;
        let (_, j) = cur.next::<usize>("column index")?;
        let (_, v) = cur.next::<f64>("entry value")?;
        if mat > m {
            return Err(Error::parse(line, format!("matrix number {mat} exceeds {m}")));
        }
        let Some(block) = blocks.get(blk.wrapping_sub(1)) else {
            return Err(Error::parse(line, format!("block number {blk} out of range")));
        };
        if i == 0 || j == 0 || i.max(j) > block.size {
            return Err(Error::parse(line, format!("index ({i}, {j}) outside block {blk}")));
        }
        if block.kind == BlockKind::Diag && i != j {
            return Err(Error::parse(line, "off-diagonal entry in a diagonal block"));
        }
        if !v.is_finite() {
            return Err(Error::parse(line, "non-finite entry"));
        }
        let e = Entry::new(blk - 1, i - 1, j - 1, v);
        if mat == 0 {
            c.push(Entry { value: -v, ..e });
        } else {
            a[mat - 1].push(e);
        }
    }
    let mut p = ConicProgram::new(blocks)?;
    p.set_objective(c)?;
    for (entries, rhs) in a.into_iter().zip(b) {
        p.add_constraint(entries, rhs)?;
    }
    Ok(p)
}

/// Parses a CSDP solution file for `program`.
///
/// The first line holds SDPA's `x` (this crate's `−y`); subsequent lines
/// `1 blk i j v` fill `Z = S` and `2 blk i j v` fill `X`. The status is
/// reported as optimal; callers should check the residuals.
pub fn parse_sdpa_solution(text: &str, program: &ConicProgram) -> Result<Solution> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty solution file"))?;
    let y: Vec<f64> = first
        .split_whitespace()
        .map(|t| t.parse::<f64>().map(|v| -v))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(1, "malformed dual vector"))?;
    if y.len() != program.num_constraints() {
        return Err(Error::parse(
            1,
            format!(
                "dual vector has {} entries, expected {}",
                y.len(),
                program.num_constraints()
            ),
        ));
    }
    let mut s = program.zero_blocks();
    let mut x = program.zero_blocks();
    for (n, l) in lines {
        let line = n + 1;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(line, "expected `matrix block i j value`"));
        }
        let int = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(line, format!("bad index `{t}`")))
        };
        let (mat, blk, i, j) = (int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?);
        let v: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad value `{}`", f[4])))?;
        let target: &mut Vec<DMatrix<f64>> = match mat {
            1 => &mut s,
            2 => &mut x,
            _ => return Err(Error::parse(line, format!("matrix tag {mat} is not 1 or 2"))),
        };
        let Some(block) = program.blocks().get(blk.wrapping_sub(1)) else {
            return Err(Error::parse(line, format!("block number {blk} out of range")));
        };
        if i == 0 || j == 0 || i.max(j) > block.size {
            return Err(Error::parse(line, format!("index ({i}, {j}) outside block {blk}")));
        }
        target[blk - 1][(i - 1, j - 1)] = v;
        target[blk - 1][(j - 1, i - 1)] = v;
    }
    Ok(Solution::evaluate(program, Status::Optimal, x, s, y, 0))
}
