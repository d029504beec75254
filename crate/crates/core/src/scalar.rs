//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the equalizer math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    /// Lossy conversion to `f64`.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for "sums to one" style checks at this precision.
    #[inline]
    fn normalization_tol() -> Self {
        let eps = Self::epsilon() * Self::of(64.0);
        eps.max(Self::of(1e-9))
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + rustfft::FftNum
        + 'static
{
}

pub(crate) fn all_finite<T: Scalar>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
