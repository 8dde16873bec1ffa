//! Scalar abstraction shared by the linear algebra, special functions and
//! density code.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    /// Relative tolerance used for symmetry and pivot checks.
    fn default_eps() -> Self;
}

impl Real for f32 {
    fn default_eps() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn default_eps() -> Self {
        1e-12
    }
}
