//! Scalar abstractions.
//!
//! Polynomial parts of the kinetics (monomials, recombination vectors, the
//! cubic expansion) only need a commutative ring with division, so they are
//! generic over [`Coefficient`] and run on exact rationals as well as on
//! floats. Everything that takes logarithms, exponentials or solves PDEs is
//! generic over [`Real`] (`f32` or `f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// Exact or floating scalar used for polynomial evaluation.
pub trait Coefficient: Clone + Num + Neg<Output = Self> + PartialOrd + Debug {
    fn from_int(v: i64) -> Self;
}

impl Coefficient for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }
}

impl Coefficient for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
}

impl Coefficient for num_rational::BigRational {
    fn from_int(v: i64) -> Self {
        num_rational::BigRational::from_integer(v.into())
    }
}

impl Coefficient for num_rational::Rational64 {
    fn from_int(v: i64) -> Self {
        num_rational::Rational64::from_integer(v)
    }
}

/// Floating point scalar for the numerical parts of the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Coefficient
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
