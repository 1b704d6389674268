//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar accepted by the geometry, alignment, loss and metric code.
///
/// Implemented for `f32` and `f64`. Oracle-level tolerances (1e-9 and tighter)
/// are only meaningful for `f64`.
pub trait Real: na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + nt::FloatConst + Default {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("count representable")
    }

    /// Lossy widening to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        <Self as nt::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn is_finite_value(self) -> bool;
}

impl Real for f32 {
    #[inline]
    fn is_finite_value(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    #[inline]
    fn is_finite_value(self) -> bool {
        f64::is_finite(self)
    }
}

/// Sums a sequence left to right. Used wherever reproducible reductions matter.
#[inline]
pub(crate) fn ordered_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::zero(), |acc, x| acc + x)
}
