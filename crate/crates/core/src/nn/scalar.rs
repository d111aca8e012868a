use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type of a [`Tensor`](super::Tensor).
///
/// Models train in `f32`; `f64` instantiations exist so the gradient
/// checker can compare against central differences without drowning in
/// rounding noise.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
