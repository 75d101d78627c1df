//! Scalar abstraction for the numeric core.
//!
//! Everything downstream of image decoding (tone mapping, fusion, attention,
//! losses, metrics) is generic over [`Real`], so the same code runs in `f32`
//! or `f64`. Concrete aliases for the common instantiations live at the
//! crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric core operates on.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::iter::Sum + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
pub(crate) fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant must be representable in the scalar type")
}
