//! Floating-point scalar abstraction for the numeric kernels.
//!
//! The model, physics, and law evaluations are generic over [`Scalar`] so
//! they run in `f32` or `f64`. The data pipeline and all shipped defaults
//! use `f64` (see the crate-root type aliases).

use num_traits::{Float, FromPrimitive, NumAssign};

/// Scalar type for numeric kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants and configuration values.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
