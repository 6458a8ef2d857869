use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::poly::Monomial;
use crate::scalar::Coefficient;

/// Sparse multivariate polynomial over a [`Coefficient`] type.
///
/// Terms are kept in grlex order and no stored coefficient is negligible
/// (see [`Coefficient::is_negligible`]).
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial<T> {
    nvars: usize,
    terms: BTreeMap<Monomial, T>,
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

impl<T: Coefficient> Polynomial<T> {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        Self::monomial(Monomial::one(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, T::one())
    }

    /// The coordinate `x_{i+1}`.
    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(Monomial::var(nvars, i), T::one())
    }

    pub fn monomial(m: Monomial, c: T) -> Self {
        let mut p = Self::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from terms, merging repeated monomials.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, T)>,
    {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            check_dim(nvars, m.nvars())?;
            p.add_term(m, c);
        }
        Ok(p)
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &Monomial) -> T {
        self.terms.get(m).cloned().unwrap_or_else(T::zero)
    }

    /// Adds `c * m`, dropping the term if the result is negligible.
    pub fn add_term(&mut self, m: Monomial, c: T) {
        debug_assert_eq!(m.nvars(), self.nvars);
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_negligible() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                if !c.is_negligible() {
                    self.terms.insert(m, c);
                }
            }
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        check_dim(self.nvars, other.nvars)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.nvars, other.nvars)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    /// Exact product with like terms merged.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        check_dim(self.nvars, other.nvars)?;
        let mut acc: BTreeMap<Monomial, T> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca.clone() * cb.clone();
                match acc.get_mut(&m) {
                    Some(e) => *e = e.clone() + c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        acc.retain(|_, c| !c.is_negligible());
        Ok(Polynomial {
            nvars: self.nvars,
            terms: acc,
        })
    }

    pub fn scale(&self, s: &T) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one(self.nvars);
        for _ in 0..k {
            out = out.multiply(self).expect("same dimension");
        }
        out
    }

    /// Value at `x`, summing terms with per-call cached powers of each
    /// variable.
    pub fn evaluate(&self, x: &[T]) -> Result<T> {
        check_dim(self.nvars, x.len())?;
        let maxdeg = self.max_exponents();
        let powers: Vec<Vec<T>> = x
            .iter()
            .zip(&maxdeg)
            .map(|(xi, &d)| {
                let mut row = Vec::with_capacity(d as usize + 1);
                row.push(T::one());
                for k in 1..=d as usize {
                    let next = row[k - 1].clone() * xi.clone();
                    row.push(next);
                }
                row
            })
            .collect();
        let mut total = T::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    t = t * powers[i][e as usize].clone();
                }
            }
            total = total + t;
        }
        Ok(total)
    }

    fn max_exponents(&self) -> Vec<u16> {
        let mut out = vec![0u16; self.nvars];
        for m in self.terms.keys() {
            for (o, &e) in out.iter_mut().zip(m.exponents()) {
                *o = (*o).max(e);
            }
        }
        out
    }

    /// Partial derivative with respect to `x_{i+1}`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            if let Some((e, dm)) = m.derivative(i) {
                let k = T::from_u16(e).expect("small integer is representable");
                out.add_term(dm, c.clone() * k);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    /// `f . grad(self)`, the rate of change of `self` along `dx/dt = f(x)`.
    pub fn lie_derivative(&self, f: &[Self]) -> Result<Self> {
        check_dim(self.nvars, f.len())?;
        for fi in f {
            check_dim(self.nvars, fi.nvars)?;
        }
        let mut acc: BTreeMap<Monomial, T> = BTreeMap::new();
        for (i, fi) in f.iter().enumerate() {
            let di = self.derivative(i);
            for (ma, ca) in &di.terms {
                for (mb, cb) in &fi.terms {
                    let m = ma.mul(mb);
                    let c = ca.clone() * cb.clone();
                    match acc.get_mut(&m) {
                        Some(e) => *e = e.clone() + c,
                        None => {
                            acc.insert(m, c);
                        }
                    }
                }
            }
        }
        acc.retain(|_, c| !c.is_negligible());
        Ok(Polynomial {
            nvars: self.nvars,
            terms: acc,
        })
    }

    /// `p(s1 x1, ..., sn xn)`: the coefficient of each monomial `m` is
    /// multiplied by `prod s_i^{m_i}`.
    pub fn rescale_vars(&self, s: &[T]) -> Result<Self> {
        check_dim(self.nvars, s.len())?;
        if let Some(index) = s.iter().position(|v| v.is_zero() || v.is_negative()) {
            return Err(Error::NonPositiveScale { index });
        }
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut k = c.clone();
            for (si, &e) in s.iter().zip(m.exponents()) {
                for _ in 0..e {
                    k = k * si.clone();
                }
            }
            out.add_term(m.clone(), k);
        }
        Ok(out)
    }

    /// Sum of the terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Whether every term has total degree `d` (the zero polynomial qualifies).
    pub fn is_homogeneous(&self, d: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == d)
    }

    pub fn map_coeffs<U: Coefficient>(&self, mut f: impl FnMut(&T) -> U) -> Polynomial<U> {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Numeric copy with `f64` coefficients.
    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map_coeffs(|c| c.to_f64_lossy())
    }

    /// Largest coefficient magnitude, as `f64`.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_f64_lossy().abs())
            .fold(0.0, f64::max)
    }

    /// Builds a polynomial in a different number of variables by remapping
    /// each monomial. Used for substitutions that permute coordinates.
    pub(crate) fn remap<F>(&self, nvars: usize, mut f: F) -> Self
    where
        F: FnMut(&Monomial) -> (Monomial, T),
    {
        let mut out = Self::zero(nvars);
        for (m, c) in &self.terms {
            let (nm, k) = f(m);
            out.add_term(nm, c.clone() * k);
        }
        out
    }
}

impl Polynomial<f64> {
    /// Drops terms whose magnitude is at most `rel` times the largest one.
    pub fn prune(&self, rel: f64) -> Self {
        let cut = rel * self.max_abs_coeff();
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > cut)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Largest coefficient-wise difference with `other`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coeff(m)).abs());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

impl<T: Coefficient> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        self.checked_add(rhs)
            .expect("polynomial dimension mismatch")
    }
}

impl<T: Coefficient> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        self.checked_sub(rhs)
            .expect("polynomial dimension mismatch")
    }
}

impl<T: Coefficient> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        self.multiply(rhs).expect("polynomial dimension mismatch")
    }
}

impl<T: Coefficient> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(&(-T::one()))
    }
}

impl<T: Coefficient> Add for Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        &self + &rhs
    }
}

impl<T: Coefficient> Sub for Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        &self - &rhs
    }
}

impl<T: Coefficient> Mul for Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        &self * &rhs
    }
}

impl<T: Coefficient> Neg for Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        -&self
    }
}

/// Fast repeated evaluation of an `f64` polynomial.
#[derive(Clone, Debug)]
pub struct PolyEvaluator {
    nvars: usize,
    max_exp: Vec<usize>,
    coeffs: Vec<f64>,
    // (variable, exponent) pairs per term, flattened.
    factors: Vec<(u32, u32)>,
    offsets: Vec<usize>,
}

impl PolyEvaluator {
    pub fn new(p: &Polynomial<f64>) -> Self {
        let mut coeffs = Vec::with_capacity(p.len());
        let mut factors = Vec::new();
        let mut offsets = vec![0];
        let mut max_exp = vec![0usize; p.nvars()];
        for (m, c) in p.terms() {
            coeffs.push(*c);
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    factors.push((i as u32, e as u32));
                    max_exp[i] = max_exp[i].max(e as usize);
                }
            }
            offsets.push(factors.len());
        }
        PolyEvaluator {
            nvars: p.nvars(),
            max_exp,
            coeffs,
            factors,
            offsets,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Evaluates at `x`; `scratch` holds the power table between calls.
    pub fn eval_with(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let stride = self.max_exp.iter().copied().max().unwrap_or(0) + 1;
        scratch.resize(stride * self.nvars, 0.0);
        for (i, &xi) in x.iter().enumerate().take(self.nvars) {
            let row = &mut scratch[i * stride..(i + 1) * stride];
            row[0] = 1.0;
            for k in 1..=self.max_exp[i] {
                row[k] = row[k - 1] * xi;
            }
        }
        let mut total = 0.0;
        for (t, &c) in self.coeffs.iter().enumerate() {
            let mut v = c;
            for &(i, e) in &self.factors[self.offsets[t]..self.offsets[t + 1]] {
                v *= scratch[i as usize * stride + e as usize];
            }
            total += v;
        }
        total
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut scratch = Vec::new();
        self.eval_with(x, &mut scratch)
    }
}

/// Fast repeated evaluation of several `f64` polynomials in the same
/// variables. Each distinct monomial is computed once per call.
#[derive(Clone, Debug)]
pub struct SystemEvaluator {
    nvars: usize,
    stride: usize,
    max_exp: Vec<usize>,
    factors: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    // (output, monomial, coefficient) triples.
    entries: Vec<(u32, u32, f64)>,
    outputs: usize,
    powers: Vec<f64>,
    monos: Vec<f64>,
}

impl SystemEvaluator {
    pub fn new(ps: &[Polynomial<f64>]) -> Self {
        let nvars = ps.first().map_or(0, |p| p.nvars());
        let mut index: BTreeMap<&Monomial, u32> = BTreeMap::new();
        let mut entries = Vec::new();
        for (o, p) in ps.iter().enumerate() {
            for (m, c) in p.terms() {
                let next = index.len() as u32;
                let k = *index.entry(m).or_insert(next);
                entries.push((o as u32, k, *c));
            }
        }
        let mut order: Vec<(&Monomial, u32)> = index.into_iter().collect();
        order.sort_by_key(|(_, k)| *k);
        let mut max_exp = vec![0usize; nvars];
        let mut factors = Vec::new();
        let mut offsets = vec![0];
        for (m, _) in &order {
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    factors.push((i as u32, e as u32));
                    max_exp[i] = max_exp[i].max(e as usize);
                }
            }
            offsets.push(factors.len());
        }
        let stride = max_exp.iter().copied().max().unwrap_or(0) + 1;
        SystemEvaluator {
            nvars,
            stride,
            max_exp,
            factors,
            offsets,
            entries,
            outputs: ps.len(),
            powers: vec![0.0; stride * nvars],
            monos: vec![0.0; order.len()],
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Writes the value of each polynomial at `x` into `out`.
    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) {
        let stride = self.stride;
        for (i, &xi) in x.iter().enumerate().take(self.nvars) {
            let row = &mut self.powers[i * stride..(i + 1) * stride];
            row[0] = 1.0;
            for k in 1..=self.max_exp[i] {
                row[k] = row[k - 1] * xi;
            }
        }
        for (t, m) in self.monos.iter_mut().enumerate() {
            let mut v = 1.0;
            for &(i, e) in &self.factors[self.offsets[t]..self.offsets[t + 1]] {
                v *= self.powers[i as usize * stride + e as usize];
            }
            *m = v;
        }
        out[..self.outputs].fill(0.0);
        for &(o, k, c) in &self.entries {
            out[o as usize] += c * self.monos[k as usize];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use num_rational::BigRational;

    fn x() -> Polynomial<f64> {
        Polynomial::var(2, 0)
    }
    fn y() -> Polynomial<f64> {
        Polynomial::var(2, 1)
    }

    #[test]
    fn binomial_square() {
        let s = &x() + &y();
        let sq = &s * &s;
        assert_eq!(sq.len(), 3);
        assert_eq!(sq.coeff(&Monomial::new(&[1, 1])), 2.0);
        assert_eq!(sq.coeff(&Monomial::new(&[2, 0])), 1.0);
        assert_eq!(sq.coeff(&Monomial::new(&[0, 2])), 1.0);
    }

    #[test]
    fn multiply_by_one_is_identity() {
        let p = &(&x() * &y()) + &Polynomial::constant(2, 3.5);
        assert_eq!(&p * &Polynomial::one(2), p);
    }

    #[test]
    fn septic_factor_expansion() {
        // x (x^2 - 2)(x^2 - 1)(x^2 - 1/4), exactly.
        let xr: Polynomial<BigRational> = Polynomial::var(1, 0);
        let x2 = &xr * &xr;
        let c = |n, d| Polynomial::constant(1, rational(n, d));
        let p = &(&(&xr * &(&x2 - &c(2, 1))) * &(&x2 - &c(1, 1))) * &(&x2 - &c(1, 4));
        let expect = [
            (7u16, rational(1, 1)),
            (5, rational(-13, 4)),
            (3, rational(11, 4)),
            (1, rational(-1, 2)),
        ];
        assert_eq!(p.len(), 4);
        for (e, c) in expect {
            assert_eq!(p.coeff(&Monomial::new(&[e])), c);
        }
    }

    #[test]
    fn evaluate_sum_of_squares() {
        let p = &(&x() * &x()) + &(&y() * &y());
        assert_eq!(p.evaluate(&[3.0, 4.0]).unwrap(), 25.0);
        assert!(matches!(
            p.evaluate(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn dimension_mismatch_in_multiply() {
        let a: Polynomial<f64> = Polynomial::var(2, 0);
        let b: Polynomial<f64> = Polynomial::var(3, 0);
        assert!(a.multiply(&b).is_err());
    }

    #[test]
    fn lie_derivative_of_constant_is_zero() {
        let v: Polynomial<f64> = Polynomial::constant(2, 4.0);
        let f = vec![y(), -x()];
        assert!(v.lie_derivative(&f).unwrap().is_zero());
    }

    #[test]
    fn rescale() {
        let xs: Polynomial<f64> = Polynomial::var(3, 0);
        let p = &xs * &xs;
        let r = p.rescale_vars(&[25.0, 25.0, 25.0]).unwrap();
        assert_eq!(r.coeff(&Monomial::new(&[2, 0, 0])), 625.0);
        assert_eq!(p.rescale_vars(&[1.0, 1.0, 1.0]).unwrap(), p);
        assert!(matches!(
            p.rescale_vars(&[1.0, 0.0, 1.0]),
            Err(Error::NonPositiveScale { index: 1 })
        ));
    }

    #[test]
    fn evaluator_matches_evaluate() {
        let p = &(&(&x() * &x()) * &y()) - &Polynomial::constant(2, 0.5);
        let e = PolyEvaluator::new(&p);
        let pt = [0.3, -1.7];
        assert!((e.eval(&pt) - p.evaluate(&pt).unwrap()).abs() < 1e-15);
        let q = &(&x() * &y()) - &p;
        let mut sys = SystemEvaluator::new(&[p.clone(), q.clone(), Polynomial::zero(2)]);
        let mut out = [f64::NAN; 3];
        sys.eval_into(&pt, &mut out);
        assert!((out[0] - p.evaluate(&pt).unwrap()).abs() < 1e-15);
        assert!((out[1] - q.evaluate(&pt).unwrap()).abs() < 1e-14);
        assert_eq!(out[2], 0.0);
    }
}
