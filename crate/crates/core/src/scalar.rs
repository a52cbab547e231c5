//! Floating point abstraction shared by every numerical routine.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real scalar the library is generic over. Implemented by `f32` and `f64`;
/// the serialized interfaces (reports, field files) always use `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + rustfft::FftNum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting literal constants written in `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    fn to_f64x(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + rustfft::FftNum
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}
