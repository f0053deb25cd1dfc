//! Scalar abstraction shared by the floating-point layers.
//!
//! Everything downstream of the exact polytope layer is generic over [`Real`],
//! which is implemented for `f32` and `f64`. Certificates are tuned for `f64`;
//! `f32` is useful for quick field exports and smoke runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Largest ambient dimension supported by the stack-allocated kernels.
pub const MAX_DIM: usize = 8;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    /// Converts an `f64` literal, panicking only on non-representable input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn ints_to_real<T: Real>(v: &[i64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x as f64)).collect()
}
