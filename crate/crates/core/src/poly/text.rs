//! Plain-text polynomial format used by config and certificate files.
//!
//! A polynomial is a sum of terms `coeff * x1^a1 * ... * xn^an`. Whitespace is
//! ignored everywhere; the `*` between factors is optional; a term may omit
//! its coefficient (`x1^2`) or its variables (`2.5`). Variables are named
//! `x1` through `xn`. Formatting writes every coefficient with 17 significant
//! digits so that parsing the output reproduces the coefficients bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};

/// Formats `p` in the text format.
pub fn format_poly(p: &Polynomial<f64>) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    // Highest-degree terms first reads more naturally.
    for (k, (m, &c)) in p.terms().collect::<Vec<_>>().into_iter().rev().enumerate() {
        let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
        if k == 0 {
            if sign == "-" {
                out.push('-');
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        let _ = write!(out, "{mag:.16e}");
        if !m.is_one() {
            let _ = write!(out, "*{m}");
        }
    }
    out
}

/// Parses the text format into a polynomial in `nvars` variables.
pub fn parse_poly(s: &str, nvars: usize) -> Result<Polynomial<f64>> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = Parser {
        src: compact.as_bytes(),
        pos: 0,
        nvars,
    };
    p.polynomial()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn polynomial(&mut self) -> Result<Polynomial<f64>> {
        let mut out = Polynomial::zero(self.nvars);
        let mut first = true;
        loop {
            let mut sign = 1.0;
            match self.peek() {
                None if first => return self.err("empty polynomial"),
                None => return self.err("dangling operator"),
                Some(b'+') => {
                    self.pos += 1;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(_) if first => {}
                Some(c) => return self.err(format!("expected `+` or `-`, found `{}`", c as char)),
            }
            // Allow "+ -3" style signs produced by hand-written files.
            while let Some(c @ (b'+' | b'-')) = self.peek() {
                self.pos += 1;
                if c == b'-' {
                    sign = -sign;
                }
            }
            let (m, c) = self.term()?;
            out.add_term(m, sign * c);
            first = false;
            if self.peek().is_none() {
                return Ok(out);
            }
        }
    }

    fn term(&mut self) -> Result<(Monomial, f64)> {
        let mut coeff = 1.0;
        let mut exps = vec![0u16; self.nvars];
        let mut any = false;
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    coeff *= self.number()?;
                }
                Some(b'x') => {
                    let (i, e) = self.factor()?;
                    exps[i] += e;
                }
                Some(_) | None if !any => return self.err("expected a term"),
                _ => break,
            }
            any = true;
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    if !matches!(self.peek(), Some(b'x' | b'0'..=b'9' | b'.')) {
                        return self.err("expected a factor after `*`");
                    }
                }
                Some(b'x') => {}
                _ => break,
            }
        }
        Ok((Monomial::new(&exps), coeff))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            let digits = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits {
                i = j;
            }
        }
        let text = std::str::from_utf8(&bytes[start..i]).expect("ascii");
        self.pos = i;
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("invalid number `{text}`"))
        })
    }

    fn factor(&mut self) -> Result<(usize, u16)> {
        self.skip_ws();
        debug_assert_eq!(self.src[self.pos], b'x');
        self.pos += 1;
        let idx = self.integer()?;
        if idx == 0 || idx > self.nvars {
            return self.err(format!("variable x{idx} outside x1..x{}", self.nvars));
        }
        let mut e = 1;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            e = self.integer()?;
        }
        let e = u16::try_from(e).or_else(|_| self.err("exponent too large"))?;
        Ok((idx - 1, e))
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected an integer");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse()
            .or_else(|_| self.err("integer out of range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hand_written_forms() {
        let p = parse_poly(" -10 x1 + 10*x2 - x1^2 x3 + 2.5e-1 ", 3).unwrap();
        assert_eq!(p.coeff(&Monomial::new(&[1, 0, 0])), -10.0);
        assert_eq!(p.coeff(&Monomial::new(&[0, 1, 0])), 10.0);
        assert_eq!(p.coeff(&Monomial::new(&[2, 0, 1])), -1.0);
        assert_eq!(p.coeff(&Monomial::one(3)), 0.25);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let a = parse_poly("3*x1^2*x2-4", 2).unwrap();
        let b = parse_poly("3 * x 1 ^ 2 x2 - 4", 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_poly("", 2).is_err());
        assert!(parse_poly("x3", 2).is_err());
        assert!(parse_poly("1 +", 2).is_err());
        assert!(parse_poly("2 x1 x", 2).is_err());
        assert_eq!(parse_poly("1 2", 2).unwrap(), parse_poly("12", 2).unwrap());
    }

    #[test]
    fn zero_round_trip() {
        let z = Polynomial::<f64>::zero(2);
        assert_eq!(format_poly(&z), "0");
        assert!(parse_poly("0", 2).unwrap().is_zero());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = Polynomial::from_terms(
            3,
            [
                (Monomial::new(&[1, 0, 0]), 0.1 + 0.2),
                (Monomial::new(&[0, 2, 1]), -1.0 / 3.0),
                (Monomial::new(&[0, 0, 0]), 6.0 * 2f64.sqrt()),
            ],
        )
        .unwrap();
        let q = parse_poly(&format_poly(&p), 3).unwrap();
        for (m, c) in p.terms() {
            assert_eq!(c.to_bits(), q.coeff(m).to_bits());
        }
        assert_eq!(p.len(), q.len());
    }
}
