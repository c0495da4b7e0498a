use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the whole crate is generic over. `f64` is the working
/// precision for everything numerical; `f32` builds and runs but the
/// default tolerances are below its resolution.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T: RealField + Copy + FromPrimitive + ToPrimitive> Scalar for T {}

/// Lift an `f64` constant into the working scalar type.
#[inline]
pub fn num<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable")
}

/// Lower a scalar to `f64`, e.g. for error reporting.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}
