//! Scalar abstraction shared by the set-computation and optimization code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real field the solvers and polyhedra are generic over.
///
/// Tolerances live on the type because they only make sense relative to the
/// precision of the arithmetic: the `f64` values are the ones the toolkit is
/// calibrated for, the `f32` values are scaled to single precision.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Membership / feasibility tolerance.
    fn feas_tol() -> Self;
    /// Slack below which a constraint row is considered redundant.
    fn redundancy_tol() -> Self;
    /// Pivot magnitude below which a tableau entry is treated as zero.
    fn pivot_tol() -> Self;
    /// Tolerance used for KKT / optimality checks inside the solvers.
    fn opt_tol() -> Self;

    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("value representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn feas_tol() -> Self {
        1e-9
    }
    fn redundancy_tol() -> Self {
        1e-7
    }
    fn pivot_tol() -> Self {
        1e-11
    }
    fn opt_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn feas_tol() -> Self {
        1e-5
    }
    fn redundancy_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn opt_tol() -> Self {
        1e-5
    }
}
