//! Coefficient types for polynomial arithmetic.
//!
//! Polynomial algebra is written once against [`Coefficient`] and used with
//! `f64` for numerics, `f32` where memory matters, and exact rationals for
//! identities that must hold without rounding (equivariance, linearity of the
//! Lie derivative, product expansions).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

use crate::defaults;

/// A field element usable as a polynomial coefficient.
pub trait Coefficient:
    Clone + Debug + PartialEq + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether a coefficient produced by arithmetic should be dropped from a
    /// sparse representation. Exact types only drop true zeros.
    fn is_negligible(&self) -> bool;

    /// Lossy conversion used when an exact polynomial is evaluated numerically.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Coefficient for f64 {
    #[inline]
    fn is_negligible(&self) -> bool {
        self.abs() < defaults::COEFF_DROP_EPS_F64
    }
}

impl Coefficient for f32 {
    #[inline]
    fn is_negligible(&self) -> bool {
        self.abs() < defaults::COEFF_DROP_EPS_F32
    }
}

impl Coefficient for BigRational {
    #[inline]
    fn is_negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

impl Coefficient for Ratio<i64> {
    #[inline]
    fn is_negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

/// Exact rational from a ratio of integers.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
