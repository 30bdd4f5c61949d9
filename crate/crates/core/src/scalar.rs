//! Scalar abstraction for the numeric core.
//!
//! Image buffers in the pipeline are single precision, but the math is
//! written once over any IEEE float so that tests can run the same code
//! paths in double precision (finite-difference oracles need the headroom).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Floating-point scalar: f32 or f64.
pub trait Scalar: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }

    fn half() -> Self {
        Self::from_f64(0.5)
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Linear interpolation `a + t * (b - a)`.
///
/// This form is exact for `t = 0`, `t = 1`, and constant inputs, and the
/// result never leaves `[min(a, b), max(a, b)]` for `t` in `[0, 1]`.
#[inline]
pub fn lerp<S: Scalar>(a: S, b: S, t: S) -> S {
    a + t * (b - a)
}
