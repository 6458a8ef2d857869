use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

/// Exponent vector of a monomial `x1^a1 ... xn^an`.
///
/// Ordered graded-lexicographically: total degree first, then the exponent of
/// `x1`, then `x2`, and so on.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: SmallVec<[u16; 10]>,
}

impl Monomial {
    pub fn new(exps: &[u16]) -> Self {
        Monomial {
            exps: SmallVec::from_slice(exps),
        }
    }

    /// The constant monomial `1` in `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial {
            exps: SmallVec::from_elem(0, n),
        }
    }

    /// The variable `x_{i+1}` in `n` variables.
    pub fn var(n: usize, i: usize) -> Self {
        let mut m = Self::one(n);
        m.exps[i] = 1;
        m
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    #[inline]
    pub fn exponents(&self) -> &[u16] {
        &self.exps
    }

    #[inline]
    pub fn exponent(&self, i: usize) -> u16 {
        self.exps[i]
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `d/dx_i` as (multiplicity, monomial); `None` when the exponent is zero.
    pub fn derivative(&self, i: usize) -> Option<(u16, Monomial)> {
        let e = self.exps[i];
        if e == 0 {
            return None;
        }
        let mut m = self.clone();
        m.exps[i] -= 1;
        Some((e, m))
    }

    /// Whether `other` divides `self`.
    pub fn divisible_by(&self, other: &Monomial) -> bool {
        self.exps.iter().zip(&other.exps).all(|(a, b)| a >= b)
    }

    pub(crate) fn exps_mut(&mut self) -> &mut [u16] {
        &mut self.exps
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// All monomials in `n` variables of total degree at most `d`, in increasing
/// grlex order. There are `C(n + d, d)` of them.
pub fn monomial_basis(n: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur = vec![0u16; n];
    for deg in 0..=d {
        homogeneous(n, deg, 0, &mut cur, &mut out);
    }
    out.sort();
    out
}

/// Monomials of total degree exactly `d`.
pub fn homogeneous_basis(n: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur = vec![0u16; n];
    homogeneous(n, d, 0, &mut cur, &mut out);
    out.sort();
    out
}

fn homogeneous(n: usize, remaining: u32, idx: usize, cur: &mut Vec<u16>, out: &mut Vec<Monomial>) {
    if n == 0 {
        if remaining == 0 {
            out.push(Monomial::new(&[]));
        }
        return;
    }
    if idx == n - 1 {
        cur[idx] = remaining as u16;
        out.push(Monomial::new(cur));
        cur[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[idx] = e as u16;
        homogeneous(n, remaining - e, idx + 1, cur, out);
    }
    cur[idx] = 0;
}

/// Binomial coefficient, used for basis-size checks.
pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n.saturating_sub(k));
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(monomial_basis(3, 2).len(), 10);
        assert_eq!(monomial_basis(3, 3).len(), 20);
        assert_eq!(monomial_basis(9, 2).len(), 55);
        assert_eq!(monomial_basis(2, 0), vec![Monomial::one(2)]);
    }

    #[test]
    fn binomial_counts_match_basis_for_small_cases() {
        for n in 1..=10usize {
            for d in 0..=10u32 {
                let basis = monomial_basis(n, d);
                assert_eq!(
                    basis.len() as u64,
                    binomial((n as u64) + d as u64, d as u64)
                );
                assert!(basis.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn grlex_order() {
        let x = Monomial::new(&[1, 0, 0]);
        let y = Monomial::new(&[0, 1, 0]);
        let z2 = Monomial::new(&[0, 0, 2]);
        let one = Monomial::one(3);
        assert!(one < y && y < x && x < z2);
        assert!(Monomial::new(&[2, 0, 0]) > Monomial::new(&[1, 1, 0]));
    }

    #[test]
    fn display() {
        assert_eq!(Monomial::new(&[2, 0, 1]).to_string(), "x1^2*x3");
        assert_eq!(Monomial::one(2).to_string(), "1");
    }
}
