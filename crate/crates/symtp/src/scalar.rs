use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. The crate root exports concrete type
/// aliases for both, so most callers never name this trait directly.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts from `f64`, the precision used by the binary formats.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("float-to-float conversion cannot fail")
    }

    /// Converts a count into a scalar; exact for every count that fits the mantissa.
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count-to-float conversion cannot fail")
    }

    /// Widens to `f64` for reporting and serialization.
    fn widen(self) -> f64 {
        self.to_f64().expect("float-to-f64 conversion cannot fail")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
