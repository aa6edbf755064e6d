//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real field used for features, labels, losses and objectives.
///
/// Implemented for `f32` and `f64`. Conversions through `f64` are used for
/// literals and for random draws, which keeps the RNG streams identical
/// across scalar types.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// True when `self` lies in the closed unit interval.
    #[inline]
    fn in_unit(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }

    #[inline]
    fn clamp_unit(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(f64::lit(0.25), 0.25);
        assert!(0.3f64.in_unit());
        assert!(!(-0.1f32).in_unit());
        assert_eq!(1.7f64.clamp_unit(), 1.0);
    }
}
