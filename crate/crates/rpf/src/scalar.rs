//! Scalar abstraction for the numeric kernels.
//!
//! Every estimator, solver and bound calculator in this crate is generic
//! over a floating-point scalar so the same code runs in `f32` or `f64`.
//! Concrete `f64` aliases for the main types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Draw a uniform sample in `[0, 1)`.
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from any primitive number.
    ///
    /// Panics if the value has no representation at all (never the case for
    /// finite inputs and `f32`/`f64` targets).
    fn cast<T: ToPrimitive>(x: T) -> Self {
        Self::from_f64(x.to_f64().expect("numeric cast")).expect("numeric cast")
    }
}

impl Real for f32 {
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl Real for f64 {
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}
