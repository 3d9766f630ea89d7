//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real field used throughout the crate (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// A tolerance of `x`, floored at a small multiple of the type's epsilon so
/// that `f64` tolerances stay meaningful for `f32`.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    lit::<T>(x).max(T::epsilon() * lit(64.0))
}

/// Mantissa, exponent and sign of a float, as returned by `integer_decode`.
pub(crate) type Decoded = (u64, i16, i8);

/// Bitwise identity key for a point; used to merge duplicate atoms.
pub(crate) fn point_key<T: Real>(p: &[T]) -> Vec<Decoded> {
    p.iter().map(|v| v.integer_decode()).collect()
}

pub(crate) fn sq_dist<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}
