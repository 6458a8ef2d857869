//! Finite groups of signed coordinate permutations.
//!
//! A [`SignedPermutation`] maps `x` to `T x` with `(T x)_i = s_i x_{pi(i)}`.
//! Groups are closed from generators, polynomials can be averaged over a
//! group orbit, and for groups of pure sign changes the monomial basis splits
//! into sign-character classes that block-diagonalize invariant Gram matrices.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use crate::defaults;
use crate::error::{Error, Result};
use crate::poly::{monomial_basis, Monomial, Polynomial};
use crate::scalar::Coefficient;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let n = perm.len();
        if signs.len() != n {
            return Err(Error::InvalidPermutation(format!(
                "{} indices but {} signs",
                n,
                signs.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidPermutation(format!(
                    "{perm:?} is not a permutation"
                )));
            }
            seen[p] = true;
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidPermutation("signs must be +1 or -1".into()));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    /// Pure sign change `x_i -> s_i x_i`.
    pub fn signs(signs: &[i8]) -> Result<Self> {
        Self::new((0..signs.len()).collect(), signs.to_vec())
    }

    /// One-line form: entry `i` is `+-(j+1)` when `(T x)_i = +-x_j`.
    /// `[-1,-2,3]` is `(x, y, z) -> (-x, -y, z)`.
    pub fn from_one_line(entries: &[i64]) -> Result<Self> {
        let mut perm = Vec::with_capacity(entries.len());
        let mut signs = Vec::with_capacity(entries.len());
        for &e in entries {
            if e == 0 {
                return Err(Error::InvalidPermutation(
                    "entries are 1-based and nonzero".into(),
                ));
            }
            perm.push(e.unsigned_abs() as usize - 1);
            signs.push(if e < 0 { -1 } else { 1 });
        }
        Self::new(perm, signs)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| Error::InvalidPermutation(format!("`{s}` is not bracketed")))?;
        let entries = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::InvalidPermutation(format!("bad entry `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_one_line(&entries)
    }

    pub fn to_one_line(&self) -> Vec<i64> {
        self.perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| s as i64 * (p as i64 + 1))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s == 1)
    }

    /// Whether the permutation part is trivial.
    pub fn is_sign_change(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn sign_vector(&self) -> &[i8] {
        &self.signs
    }

    /// `self ∘ other`, i.e. `x -> self(other(x))`.
    pub fn compose(&self, other: &Self) -> Self {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut signs = vec![1; n];
        for i in 0..n {
            let j = self.perm[i];
            perm[i] = other.perm[j];
            signs[i] = self.signs[i] * other.signs[j];
        }
        SignedPermutation { perm, signs }
    }

    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut signs = vec![1; n];
        for i in 0..n {
            perm[self.perm[i]] = i;
            signs[self.perm[i]] = self.signs[i];
        }
        SignedPermutation { perm, signs }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| s as f64 * x[p])
            .collect()
    }

    /// The polynomial `x -> p(T x)`.
    pub fn act<T: Coefficient>(&self, p: &Polynomial<T>) -> Result<Polynomial<T>> {
        if p.nvars() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.nvars(),
            });
        }
        let n = self.dim();
        Ok(p.remap(n, |m| {
            let mut out = Monomial::one(n);
            let mut negative = false;
            for i in 0..n {
                let e = m.exponent(i);
                out.exps_mut()[self.perm[i]] += e;
                if self.signs[i] < 0 && e % 2 == 1 {
                    negative = !negative;
                }
            }
            (out, if negative { -T::one() } else { T::one() })
        }))
    }

    /// Sign acquired by monomial `m` under a pure sign change.
    pub fn monomial_sign(&self, m: &Monomial) -> i8 {
        let odd = self
            .signs
            .iter()
            .zip(m.exponents())
            .filter(|(&s, &e)| s < 0 && e % 2 == 1)
            .count();
        if odd % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for SignedPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_one_line().iter().map(|e| e.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// A finite group of signed permutations, stored as its full element list.
/// The identity is always the first element.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryGroup {
    dim: usize,
    elements: Vec<SignedPermutation>,
    generators: Vec<SignedPermutation>,
}

impl SymmetryGroup {
    pub fn trivial(dim: usize) -> Self {
        SymmetryGroup {
            dim,
            elements: vec![SignedPermutation::identity(dim)],
            generators: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SignedPermutation] {
        &self.elements
    }

    pub fn generators(&self) -> &[SignedPermutation] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Whether every element is a pure sign change.
    pub fn is_sign_group(&self) -> bool {
        self.elements.iter().all(SignedPermutation::is_sign_change)
    }

    pub fn is_invariant<T: Coefficient>(&self, p: &Polynomial<T>) -> bool {
        self.generators
            .iter()
            .all(|g| g.act(p).map(|q| &q == p).unwrap_or(false))
    }

    /// Whether `f(T x) = T f(x)` for every generator, compared coefficient
    /// by coefficient.
    pub fn is_equivariant<T: Coefficient>(&self, f: &[Polynomial<T>]) -> bool {
        if f.len() != self.dim {
            return false;
        }
        self.generators.iter().all(|g| {
            (0..self.dim).all(|i| {
                let lhs = match g.act(&f[i]) {
                    Ok(p) => p,
                    Err(_) => return false,
                };
                // (T f)(x)_i = s_i f_{pi(i)}(x)
                let rhs = if g.signs[i] < 0 {
                    -&f[g.perm[i]]
                } else {
                    f[g.perm[i]].clone()
                };
                lhs == rhs
            })
        })
    }
}

/// Closes `generators` under composition. Fails if the closure would exceed
/// `cap` elements.
pub fn close_group(
    dim: usize,
    generators: &[SignedPermutation],
    cap: usize,
) -> Result<SymmetryGroup> {
    for g in generators {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.dim(),
            });
        }
    }
    let id = SignedPermutation::identity(dim);
    let mut elements = vec![id.clone()];
    let mut seen: HashSet<SignedPermutation> = HashSet::from([id]);
    let mut queue: VecDeque<SignedPermutation> = elements.iter().cloned().collect();
    while let Some(e) = queue.pop_front() {
        for g in generators {
            let next = g.compose(&e);
            if seen.insert(next.clone()) {
                if elements.len() >= cap {
                    return Err(Error::GroupTooLarge { cap });
                }
                elements.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    Ok(SymmetryGroup {
        dim,
        elements,
        generators: generators
            .iter()
            .filter(|g| !g.is_identity())
            .cloned()
            .collect(),
    })
}

/// [`close_group`] with the default cap.
pub fn close(dim: usize, generators: &[SignedPermutation]) -> Result<SymmetryGroup> {
    close_group(dim, generators, defaults::GROUP_CAP)
}

/// `(1/|G|) sum_T p(T x)`.
pub fn orbit_average<T: Coefficient>(
    p: &Polynomial<T>,
    group: &SymmetryGroup,
) -> Result<Polynomial<T>> {
    if p.nvars() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            found: p.nvars(),
        });
    }
    let mut acc = Polynomial::zero(p.nvars());
    for t in group.elements() {
        acc = acc.checked_add(&t.act(p)?)?;
    }
    let order = T::from_usize(group.order()).expect("group order is representable");
    Ok(acc.scale(&(T::one() / order)))
}

fn require_sign_group(group: &SymmetryGroup) -> Result<()> {
    if group.is_sign_group() {
        Ok(())
    } else {
        Err(Error::UnsupportedGroup(
            "only pure sign-change groups map monomials to multiples of themselves".into(),
        ))
    }
}

/// Sign of `m` under every group element, in element order.
pub fn sign_character(m: &Monomial, group: &SymmetryGroup) -> Vec<i8> {
    group
        .elements()
        .iter()
        .map(|t| t.monomial_sign(m))
        .collect()
}

/// Monomials of degree at most `d` fixed by every element of a sign group.
pub fn invariant_basis(n: usize, d: u32, group: &SymmetryGroup) -> Result<Vec<Monomial>> {
    if group.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: group.dim(),
        });
    }
    require_sign_group(group)?;
    Ok(monomial_basis(n, d)
        .into_iter()
        .filter(|m| group.elements().iter().all(|t| t.monomial_sign(m) == 1))
        .collect())
}

/// Partitions basis indices by sign character. Blocks are ordered by their
/// first member and keep basis order internally.
pub fn sign_blocks(basis: &[Monomial], group: &SymmetryGroup) -> Result<Vec<Vec<usize>>> {
    require_sign_group(group)?;
    let mut classes: BTreeMap<Vec<i8>, Vec<usize>> = BTreeMap::new();
    for (i, m) in basis.iter().enumerate() {
        classes.entry(sign_character(m, group)).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = classes.into_values().collect();
    blocks.sort_by_key(|b| b[0]);
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn lorenz_group() -> SymmetryGroup {
        close(3, &[SignedPermutation::parse("[-1,-2,3]").unwrap()]).unwrap()
    }

    fn nine_mode_group() -> SymmetryGroup {
        let g1 = SignedPermutation::signs(&[1, 1, 1, -1, -1, -1, -1, -1, 1]).unwrap();
        let g2 = SignedPermutation::signs(&[1, -1, -1, 1, 1, -1, -1, -1, 1]).unwrap();
        close(9, &[g1, g2]).unwrap()
    }

    #[test]
    fn group_orders() {
        assert_eq!(lorenz_group().order(), 2);
        assert_eq!(nine_mode_group().order(), 4);
        assert_eq!(close(3, &[]).unwrap().order(), 1);
    }

    #[test]
    fn closure_cap_is_enforced() {
        // A 5-cycle generates a group of order 5.
        let c = SignedPermutation::from_one_line(&[2, 3, 4, 5, 1]).unwrap();
        assert_eq!(close_group(5, std::slice::from_ref(&c), 5).unwrap().order(), 5);
        assert!(matches!(
            close_group(5, &[c], 4),
            Err(Error::GroupTooLarge { cap: 4 })
        ));
    }

    #[test]
    fn closure_is_a_group() {
        let a = SignedPermutation::from_one_line(&[2, -1, 3]).unwrap();
        let b = SignedPermutation::from_one_line(&[1, 2, -3]).unwrap();
        let g = close(3, &[a, b]).unwrap();
        let set: HashSet<_> = g.elements().iter().cloned().collect();
        assert!(set.contains(&SignedPermutation::identity(3)));
        for x in g.elements() {
            assert!(set.contains(&x.inverse()));
            for y in g.elements() {
                assert!(set.contains(&x.compose(y)));
            }
        }
    }

    #[test]
    fn parse_and_display() {
        let t = SignedPermutation::parse(" [ -1, -2 ,3 ] ").unwrap();
        assert_eq!(t.to_string(), "[-1,-2,3]");
        assert_eq!(t.apply(&[1.0, 2.0, 3.0]), vec![-1.0, -2.0, 3.0]);
        assert!(SignedPermutation::parse("[1,1]").is_err());
        assert!(SignedPermutation::parse("1,2").is_err());
    }

    #[test]
    fn action_matches_pointwise_substitution() {
        let t = SignedPermutation::from_one_line(&[3, -1, 2]).unwrap();
        let p = parse_poly("x1^2*x2 - 3*x2*x3^3 + x1", 3).unwrap();
        let q = t.act(&p).unwrap();
        let x = [0.3, -1.2, 0.7];
        let tx = t.apply(&x);
        assert!((q.evaluate(&x).unwrap() - p.evaluate(&tx).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn orbit_average_examples() {
        let g = lorenz_group();
        let x = parse_poly("x1", 3).unwrap();
        assert!(orbit_average(&x, &g).unwrap().is_zero());
        let inv = parse_poly("x1^2 + x1*x2 + x3", 3).unwrap();
        assert_eq!(orbit_average(&inv, &g).unwrap(), inv);
        let p = parse_poly("x1^2 + x1", 3).unwrap();
        assert_eq!(
            orbit_average(&p, &g).unwrap(),
            parse_poly("x1^2", 3).unwrap()
        );
    }

    #[test]
    fn invariant_basis_examples() {
        let g = lorenz_group();
        let b = invariant_basis(3, 2, &g).unwrap();
        let names: Vec<String> = b.iter().map(|m| m.to_string()).collect();
        assert_eq!(b.len(), 6);
        for want in ["1", "x3", "x1^2", "x1*x2", "x2^2", "x3^2"] {
            assert!(
                names.contains(&want.to_string()),
                "{want} missing from {names:?}"
            );
        }
        let trivial = SymmetryGroup::trivial(3);
        assert_eq!(
            invariant_basis(3, 3, &trivial).unwrap(),
            monomial_basis(3, 3)
        );

        let g2 = close(2, &[SignedPermutation::parse("[-1,-2]").unwrap()]).unwrap();
        let b2: Vec<String> = invariant_basis(2, 2, &g2)
            .unwrap()
            .iter()
            .map(|m| m.to_string())
            .collect();
        assert_eq!(b2, vec!["1", "x2^2", "x1*x2", "x1^2"]);
    }

    #[test]
    fn non_sign_groups_are_rejected() {
        let swap = SignedPermutation::from_one_line(&[2, 1]).unwrap();
        let g = close(2, &[swap]).unwrap();
        assert!(matches!(
            invariant_basis(2, 2, &g),
            Err(Error::UnsupportedGroup(_))
        ));
        assert!(sign_blocks(&monomial_basis(2, 1), &g).is_err());
    }

    #[test]
    fn sign_block_examples() {
        let g = lorenz_group();
        let basis = monomial_basis(3, 1);
        let blocks = sign_blocks(&basis, &g).unwrap();
        let named: Vec<Vec<String>> = blocks
            .iter()
            .map(|b| b.iter().map(|&i| basis[i].to_string()).collect())
            .collect();
        assert_eq!(named, vec![vec!["1", "x3"], vec!["x2", "x1"]]);

        assert_eq!(
            sign_blocks(&basis, &SymmetryGroup::trivial(3))
                .unwrap()
                .len(),
            1
        );

        let nm = nine_mode_group();
        let blocks = sign_blocks(&monomial_basis(9, 1), &nm).unwrap();
        let mut sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        sizes.sort();
        // a1, a9 and 1 | a2, a3 | a4, a5 | a6, a7, a8
        assert_eq!(sizes, vec![2, 2, 3, 3]);
    }

    #[test]
    fn equivariance_check() {
        let g = lorenz_group();
        let f = vec![
            parse_poly("-10*x1 + 10*x2", 3).unwrap(),
            parse_poly("28*x1 - x2 - x1*x3", 3).unwrap(),
            parse_poly("-2.5*x3 + x1*x2", 3).unwrap(),
        ];
        assert!(g.is_equivariant(&f));
        let mut broken = f.clone();
        broken[2] = parse_poly("-2.5*x3 + x1", 3).unwrap();
        assert!(!g.is_equivariant(&broken));
    }
}
