//! Floating-point abstraction used by every numeric module.
//!
//! All core math is written against [`Scalar`] so the same code runs in
//! `f32` or `f64`; the crate root exports concrete `f64` aliases for the
//! common types.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive};

/// Scalar type the numeric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (exact for `f64` itself).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    /// Conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Sign with the fixed convention `sign(0) = +1`.
///
/// Used everywhere a real-valued score is turned into a ±1 prediction so
/// that decisions at the boundary are well defined.
pub fn sign_pm<T: Scalar>(v: T) -> i8 {
    if v >= T::zero() {
        1
    } else {
        -1
    }
}

/// Compensated (Kahan) summation over an iterator of terms.
pub fn kahan_sum<T: Scalar>(terms: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for t in terms {
        let y = t - carry;
        let s = sum + y;
        carry = (s - sum) - y;
        sum = s;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_zero_is_plus_one() {
        assert_eq!(sign_pm(0.0f64), 1);
        assert_eq!(sign_pm(-0.0f64), 1);
        assert_eq!(sign_pm(1e-300), 1);
        assert_eq!(sign_pm(-1e-300), -1);
    }

    #[test]
    fn kahan_handles_cancellation() {
        // 1 + 1e-16 repeated: naive sum loses the small terms entirely.
        let terms: Vec<f64> = std::iter::once(1.0)
            .chain(std::iter::repeat(1e-16).take(10_000))
            .collect();
        let s = kahan_sum(terms.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
