//! Scalar abstraction: the algebraic core runs either over exact rationals
//! or over floating point, selected by the type parameter.

use std::fmt;

use num::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Coefficient field for multivectors and ring presentations.
///
/// Implemented for `f32`/`f64` (numeric mode) and [`Rational`] (exact mode).
/// `tolerance` is the magnitude below which a value counts as zero; it is
/// exactly zero in exact mode.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + PartialOrd + Clone + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn tolerance() -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer out of range for scalar type")
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> f64 {
        1e-12
    }
}

impl Scalar for f32 {
    fn tolerance() -> f32 {
        1e-6
    }
}

impl Scalar for BigRational {
    fn tolerance() -> BigRational {
        num::zero()
    }
}

/// Exact scalar used by the obstruction checks and ring validation.
pub type Rational = BigRational;

/// Shorthand for an exact rational from an integer pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(num.into(), den.into())
}
