//! Scalar abstraction for the geometry and deterministic-flow layers.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar accepted by the generic modules (`f32`, `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// Tolerance used for exact-arithmetic identities: `1e-12` in `f64`,
    /// a few ulps in narrower types.
    #[inline]
    fn exact_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sech x` without overflow for large `|x|`.
#[inline]
pub fn sech<T: Real>(x: T) -> T {
    let e = (-x.abs()).exp();
    let two = T::lit(2.0);
    two * e / (T::one() + e * e)
}

/// `ln sech x` valid for any finite or infinite `x`.
#[inline]
pub fn ln_sech<T: Real>(x: T) -> T {
    let a = x.abs();
    T::LN_2() - a - (-(a + a)).exp().ln_1p()
}
