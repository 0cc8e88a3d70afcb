use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    /// Maps an `f64` in `(0, 1)` into the open unit interval of `Self`,
    /// guarding against rounding onto 0 or 1 in lower precision.
    #[inline]
    fn open_unit(u: f64) -> Self {
        let v = Self::lit(u);
        if v >= Self::one() {
            Self::one() - Self::epsilon() / Self::lit(2.0)
        } else if v <= Self::zero() {
            Self::min_positive_value()
        } else {
            v
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
