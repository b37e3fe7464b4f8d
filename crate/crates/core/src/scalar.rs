use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate. Implemented for `f32` and `f64`.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
