//! Floating-point abstraction shared by the LP engine and the distance code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the simplex and haversine kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or configuration value.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Zero threshold for tableau entries.
    fn zero_tol() -> Self {
        Self::epsilon().sqrt() * Self::lit(1e-4)
    }

    /// Primal/dual feasibility tolerance on normalized rows.
    fn feas_tol() -> Self {
        Self::epsilon().sqrt() * Self::lit(0.1)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
