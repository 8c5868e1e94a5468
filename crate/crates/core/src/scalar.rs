//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the model, LP and closed-form solver are generic over.
///
/// Tolerances live on the trait so that `f32` instantiations get thresholds
/// that are meaningful at single precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Tolerance for normalization and local balance checks.
    fn balance_tol() -> Self;
    /// Smallest magnitude accepted as a simplex pivot.
    fn pivot_tol() -> Self;
    /// Distance from 0 or 1 below which a recovered probability is snapped.
    fn snap_tol() -> Self;
    /// Tolerance for feasibility of LP rows and closed-form candidates.
    fn feas_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite doubles at all, which no supported type does.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar literal")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("scalar from usize")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn balance_tol() -> Self {
        1e-10
    }
    fn pivot_tol() -> Self {
        1e-10
    }
    fn snap_tol() -> Self {
        1e-9
    }
    fn feas_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn balance_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-5
    }
    fn snap_tol() -> Self {
        1e-4
    }
    fn feas_tol() -> Self {
        1e-4
    }
}
