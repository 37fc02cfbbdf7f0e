//! Scalar abstraction for the scoring and policy math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used by cards and policy: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant fits every Scalar")
    }

    fn of_u64(value: u64) -> Self {
        Self::from_u64(value).expect("u64 converts to a float scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
