//! Line-oriented sparse text format for [`SdpProblem`].
//!
//! ```text
//! sdp-sparse 1
//! blocks 2 6 4          # block count, then each block order
//! free 3                # number of free variables
//! rows 10               # number of equality rows
//! offset 0e0            # constant objective term
//! c 0 0 1 1.5e0         # objective entry: block i j value  (i <= j)
//! f 2 1e0               # objective coefficient of free variable 2
//! r 4 -2.5e-1           # right-hand side of row 4
//! a 4 1 0 3 1e0         # row 4, block 1, entry (0, 3)
//! b 4 2 -1e0            # row 4, free variable 2
//! ```
//!
//! Indices are zero-based. Block entries are upper-triangle and stand for the
//! symmetric pair, so they enter `<A, X>` with weight 2 off the diagonal.
//! Values are written with 17 significant digits and read back bit-exactly.
//! Blank lines and text after `#` are ignored.

use std::fmt::Write as _;

use super::{BlockEntry, SdpProblem, SdpRow};
use crate::error::{Error, Result};

pub fn write_sdp(p: &SdpProblem) -> String {
    let mut out = String::from("sdp-sparse 1\n");
    let _ = write!(out, "blocks {}", p.block_sizes.len());
    for n in &p.block_sizes {
        let _ = write!(out, " {n}");
    }
    out.push('\n');
    let _ = writeln!(out, "free {}", p.n_free);
    let _ = writeln!(out, "rows {}", p.rows.len());
    let _ = writeln!(out, "offset {:.16e}", p.objective_offset);
    for e in &p.objective {
        let _ = writeln!(out, "c {} {} {} {:.16e}", e.block, e.i, e.j, e.value);
    }
    for (k, v) in p.objective_free.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(out, "f {k} {v:.16e}");
        }
    }
    for (r, row) in p.rows.iter().enumerate() {
        let _ = writeln!(out, "r {r} {:.16e}", row.rhs);
        for e in &row.entries {
            let _ = writeln!(out, "a {r} {} {} {} {:.16e}", e.block, e.i, e.j, e.value);
        }
        for (k, v) in &row.free {
            let _ = writeln!(out, "b {r} {k} {v:.16e}");
        }
    }
    out
}

fn row_mut(p: &mut SdpProblem, r: usize) -> Option<&mut SdpRow> {
    p.rows.get_mut(r)
}

pub fn read_sdp(text: &str) -> Result<SdpProblem> {
    let mut p = SdpProblem::default();
    let mut header = false;
    let mut nrows: Option<usize> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            pos: ln + 1,
            msg: format!("line {}: {msg}", ln + 1),
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let int = |i: usize| -> Result<usize> {
            toks.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected a non-negative integer"))
        };
        let real = |i: usize| -> Result<f64> {
            toks.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected a number"))
        };
        let bad_row = || err("row index out of range");
        if !header {
            if toks != ["sdp-sparse", "1"] {
                return Err(err("missing `sdp-sparse 1` header"));
            }
            header = true;
            continue;
        }
        match toks[0] {
            "blocks" => {
                let nb = int(1)?;
                p.block_sizes = (0..nb).map(|k| int(2 + k)).collect::<Result<_>>()?;
            }
            "free" => {
                p.n_free = int(1)?;
                p.objective_free = vec![0.0; p.n_free];
            }
            "rows" => {
                let m = int(1)?;
                nrows = Some(m);
                p.rows = vec![SdpRow::default(); m];
            }
            "offset" => p.objective_offset = real(1)?,
            "c" => p
                .objective
                .push(BlockEntry::new(int(1)?, int(2)?, int(3)?, real(4)?)),
            "f" => {
                let k = int(1)?;
                let v = real(2)?;
                *p.objective_free
                    .get_mut(k)
                    .ok_or_else(|| err("free index out of range"))? = v;
            }
            "r" => {
                let v = real(2)?;
                row_mut(&mut p, int(1)?).ok_or_else(bad_row)?.rhs = v;
            }
            "a" => {
                let e = BlockEntry::new(int(2)?, int(3)?, int(4)?, real(5)?);
                row_mut(&mut p, int(1)?)
                    .ok_or_else(bad_row)?
                    .entries
                    .push(e);
            }
            "b" => {
                let (k, v) = (int(2)?, real(3)?);
                row_mut(&mut p, int(1)?)
                    .ok_or_else(bad_row)?
                    .free
                    .push((k, v));
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    if !header || nrows.is_none() {
        return Err(Error::Parse {
            pos: 0,
            msg: "incomplete sdp-sparse file".into(),
        });
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut p = SdpProblem::new(vec![2, 1], 2);
        p.objective = vec![BlockEntry::new(0, 0, 1, 0.1 + 0.2)];
        p.objective_free = vec![1.0, 0.0];
        p.objective_offset = -1.0 / 3.0;
        p.rows.push(SdpRow {
            entries: vec![
                BlockEntry::new(0, 1, 1, 2.0),
                BlockEntry::new(1, 0, 0, -1.0),
            ],
            free: vec![(1, std::f64::consts::PI)],
            rhs: 5.0,
        });
        let q = read_sdp(&write_sdp(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_sdp("").is_err());
        assert!(read_sdp("sdp-sparse 1\nblocks 1 2\nfree 0\nrows 1\na 3 0 0 0 1").is_err());
        assert!(read_sdp("sdp-sparse 1\nblocks 1 2\nfree 0\nrows 1\nzz").is_err());
    }
}
