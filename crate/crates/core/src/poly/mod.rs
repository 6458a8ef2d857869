//! Sparse multivariate polynomials.

mod monomial;
mod polynomial;
mod text;

pub use monomial::{binomial, homogeneous_basis, monomial_basis, Monomial};
pub use polynomial::{PolyEvaluator, Polynomial, SystemEvaluator};
pub use text::{format_poly, parse_poly};

use crate::error::Result;
use crate::scalar::Coefficient;

/// Product of two polynomials in the same variables.
pub fn multiply<T: Coefficient>(p: &Polynomial<T>, q: &Polynomial<T>) -> Result<Polynomial<T>> {
    p.multiply(q)
}

/// `f . grad(v)`.
pub fn lie_derivative<T: Coefficient>(
    v: &Polynomial<T>,
    f: &[Polynomial<T>],
) -> Result<Polynomial<T>> {
    v.lie_derivative(f)
}

/// Coordinates `x1..xn` of an `n`-variable ring, for building polynomials by hand.
pub fn vars<T: Coefficient>(n: usize) -> Vec<Polynomial<T>> {
    (0..n).map(|i| Polynomial::var(n, i)).collect()
}
