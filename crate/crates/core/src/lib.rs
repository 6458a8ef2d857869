//! Certified bounds on extreme values over global attractors of polynomial
//! ODEs.

pub mod bounds;
pub mod defaults;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod poly;
pub mod scalar;
pub mod sdp;
pub mod soscomp;
pub mod symmetry;

pub use error::{Error, Result};
pub use poly::{Monomial, Polynomial};
pub use scalar::Coefficient;

/// Polynomials with `f64` coefficients, used for all numerics.
pub type Poly = Polynomial<f64>;
/// Single-precision polynomials.
pub type Poly32 = Polynomial<f32>;
/// Exact rational polynomials.
pub type RationalPoly = Polynomial<num_rational::BigRational>;
