//! Numeric traits shared by every module.
//!
//! The belt protocol is pure rational arithmetic, so it only needs [`Scalar`]
//! and runs unchanged over `f64` or exact `BigRational`. Everything that
//! touches oscillatory integrals needs transcendental functions and is written
//! against [`Real`] (`f32` or `f64`).

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar: signed, ordered, constructible from literals.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Num + Signed + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + Send + Sync + 'static
{
}

/// Floating point scalar used by the optical and estimation code.
pub trait Real: Scalar + Float + FloatConst + Sum + Copy + rustfft::FftNum {}

impl<T> Real for T where T: Scalar + Float + FloatConst + Sum + Copy + rustfft::FftNum {}

/// Converts an `f64` literal into `T`.
///
/// Panics only for non-finite input, which never reaches here from a literal.
#[inline]
pub fn lit<T: FromPrimitive>(x: f64) -> T {
    T::from_f64(x).expect("finite literal is representable")
}

/// `2` in any scalar type.
#[inline]
pub(crate) fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

#[inline]
pub(crate) fn to_f64<T: ToPrimitive>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
