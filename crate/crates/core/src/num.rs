//! Scalar abstraction for terrain, sizing and cost arithmetic.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable for elevations, distances and costs.
///
/// Implemented for `f32` and `f64`. The integer-program layer always works in
/// `f64`, so every scalar must convert losslessly enough through
/// [`ToPrimitive::to_f64`].
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only on NaN-producing conversions
    /// which cannot occur for the finite literals used in this crate.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal representable in scalar type")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(f32::lit(2.5).f64(), 2.5);
        assert_eq!(f64::lit(-7.25), -7.25);
    }
}
