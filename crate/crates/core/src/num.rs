//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{ComplexField, RealField};
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point scalar usable by the whole pipeline: elliptic kernels,
/// FFT-based calculus and dense eigensolvers.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// assume `f64`.
pub trait Real:
    RealField + FftNum + Copy + FloatConst + FromPrimitive + ToPrimitive + Display + LowerExp + Debug
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Absolute value; `RealField` and `Signed` both provide `abs`, so this
    /// picks one unambiguously.
    #[inline]
    fn mag(self) -> Self {
        ComplexField::abs(self)
    }

    #[inline]
    fn finite(self) -> bool {
        ComplexField::is_finite(&self)
    }

    #[inline]
    fn machine_eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Largest absolute entry of a slice (0 for an empty slice).
pub fn max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.mag()))
}
