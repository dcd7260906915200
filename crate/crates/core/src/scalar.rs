//! Scalar abstraction. Numeric kernels are generic over the floating point
//! type; tolerances quoted in the documentation assume binary64.

use std::fmt;

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + NumAssignOps + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in the scalar type")
    }

    /// Lossy view as `f64`, used when assembling reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Binary maximum by comparison. Avoids the method-name clash between
/// `num_traits::Float::max` and `nalgebra::RealField::max` in bounds that
/// carry both traits.
#[inline]
pub fn rmax<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Binary minimum by comparison; see [`rmax`].
#[inline]
pub fn rmin<T: Real>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}
