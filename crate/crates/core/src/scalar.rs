//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every finite `f64` is representable (possibly rounded).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Tolerance applied when validating that a probability row sums to one.
    fn row_tolerance() -> Self;

    /// Absolute slack for comparisons between two exactly computed quantities
    /// (theorem checks, invariants).
    fn check_tolerance() -> Self;

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn row_tolerance() -> Self {
        64.0 * f32::EPSILON
    }

    fn check_tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn row_tolerance() -> Self {
        1e-9
    }

    fn check_tolerance() -> Self {
        1e-10
    }
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Largest element of a non-empty slice.
pub fn max_of<T: Scalar>(values: &[T]) -> T {
    values[argmax(values)]
}
