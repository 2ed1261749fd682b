//! Text sidecar carrying per-frame block motion.
//!
//! ```text
//! MF <t> <blocks_x> <blocks_y> <block_size>
//! dx,dy dx,dy ...      (blocks_y rows of blocks_x pairs)
//! ```
//!
//! Frame indices start at 0 and increase by one. Blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{MotionField, MotionVector};
use crate::error::{Error, Result};

fn serr(line: usize, msg: impl Into<String>) -> Error {
    Error::Sidecar {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<[usize; 4]> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("MF") {
        return Err(serr(line_no, format!("expected header 'MF t bx by bs', got '{line}'")));
    }
    let nums: Vec<usize> = parts
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| serr(line_no, "malformed header: non-integer field"))?;
    match nums[..] {
        [t, bx, by, bs] if bs > 0 => Ok([t, bx, by, bs]),
        [_, _, _, 0] => Err(serr(line_no, "block size must be positive")),
        _ => Err(serr(line_no, format!("malformed header: expected 4 fields, got {}", nums.len()))),
    }
}

fn parse_vector(line_no: usize, tok: &str) -> Result<MotionVector> {
    let (a, b) = tok
        .split_once(',')
        .ok_or_else(|| serr(line_no, format!("expected 'dx,dy', got '{tok}'")))?;
    let dx = a
        .parse()
        .map_err(|_| serr(line_no, format!("non-integer vector '{tok}'")))?;
    let dy = b
        .parse()
        .map_err(|_| serr(line_no, format!("non-integer vector '{tok}'")))?;
    Ok(MotionVector::new(dx, dy))
}

pub fn parse_motion_sidecar(text: &str) -> Result<Vec<MotionField>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut fields = Vec::new();
    while let Some((line_no, line)) = lines.next() {
        let [t, bx, by, bs] = parse_header(line_no, line)?;
        if t != fields.len() {
            return Err(serr(
                line_no,
                format!("non-contiguous frame index {t}, expected {}", fields.len()),
            ));
        }
        let mut vectors = Vec::with_capacity(bx * by);
        for row in 0..by {
            let (row_no, row_line) = lines
                .next()
                .ok_or_else(|| serr(line_no, format!("frame {t}: missing row {row}")))?;
            if row_line.starts_with("MF") {
                return Err(serr(row_no, format!("frame {t}: expected {by} rows, got {row}")));
            }
            let before = vectors.len();
            for tok in row_line.split_whitespace() {
                vectors.push(parse_vector(row_no, tok)?);
            }
            let got = vectors.len() - before;
            if got != bx {
                return Err(serr(row_no, format!("expected {bx} columns, got {got}")));
            }
        }
        fields.push(MotionField {
            blocks_x: bx,
            blocks_y: by,
            block_size: bs,
            vectors,
        });
    }
    Ok(fields)
}

pub fn read_motion_sidecar(path: impl AsRef<Path>) -> Result<Vec<MotionField>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_motion_sidecar(&text)
}

pub fn format_motion_sidecar(fields: &[MotionField]) -> String {
    let mut out = String::new();
    for (t, f) in fields.iter().enumerate() {
        let _ = writeln!(out, "MF {t} {} {} {}", f.blocks_x, f.blocks_y, f.block_size);
        for row in f.vectors.chunks(f.blocks_x.max(1)) {
            let line: Vec<String> = row.iter().map(|v| format!("{},{}", v.dx, v.dy)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}
