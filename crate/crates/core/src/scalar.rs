use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type of probe parameters and activations: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the trainer are written in `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn widen(v: f32) -> Self;

    fn to_f32_lossy(self) -> f32;
}

impl Scalar for f32 {
    fn widen(v: f32) -> Self {
        v
    }

    fn to_f32_lossy(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn widen(v: f32) -> Self {
        v as f64
    }

    fn to_f32_lossy(self) -> f32 {
        self as f32
    }
}
