//! Scalar abstraction for the real-valued parts of the engine.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used by the classifier, the objective and the
/// schedule metrics. Implemented by `f32` and `f64`; `f64` is the default
/// type parameter throughout the crate.
pub trait Real: Float + FromPrimitive + Sum<Self> + fmt::Debug + fmt::Display + 'static {
    /// Lossless-enough conversion from an unsigned integer quantity
    /// (durations, counters). Panics only if the scalar cannot represent
    /// small integers, which no `Float` type triggers.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("float scalar must represent counters")
    }

    /// Conversion from `f64` literals (weights, tolerances).
    fn from_f64_lit(x: f64) -> Self {
        Self::from_f64(x).expect("float scalar must represent f64 literals")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Sum<T> + fmt::Debug + fmt::Display + 'static {}
