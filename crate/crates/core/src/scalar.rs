use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the probability kernels are generic over.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance used when checking that a distribution sums to one.
    fn mass_tolerance() -> Self {
        let floor = Self::from_f64(1e-9).unwrap();
        let scaled = Self::epsilon() * Self::from_f64(1e4).unwrap();
        floor.max(scaled)
    }

    /// Tolerance for per-row normalization of transition matrices.
    fn row_tolerance() -> Self {
        let floor = Self::from_f64(1e-12).unwrap();
        let scaled = Self::epsilon() * Self::from_f64(64.0).unwrap();
        floor.max(scaled)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}
