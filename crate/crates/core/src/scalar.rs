//! Scalar abstraction shared by every numeric module.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Floating point scalar the dynamics and sampling code is generic over.
///
/// Implemented for `f32` and `f64`. Only `RealField` methods are used on
/// generic values so there is a single `sin`/`sqrt`/... in scope.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Widens a scalar to `f64` for reporting and file output.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
