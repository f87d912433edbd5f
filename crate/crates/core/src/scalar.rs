//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written against [`Scalar`], which is implemented for `f32` and
//! `f64`. Linear algebra goes through `nalgebra`, so the trait builds on its
//! `RealField`; conversions and bounds come from `num-traits`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use statrs::distribution::{ContinuousCDF, Normal};

/// Floating-point scalar usable by the GP, acquisition, trajectory and CE code.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Positive infinity, used as the cost of infeasible candidates.
    fn inf() -> Self;
    /// Largest finite value.
    fn max_finite() -> Self;
    /// Machine epsilon.
    fn eps() -> Self;
}

impl Scalar for f32 {
    fn inf() -> Self {
        f32::INFINITY
    }
    fn max_finite() -> Self {
        f32::MAX
    }
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Scalar for f64 {
    fn inf() -> Self {
        f64::INFINITY
    }
    fn max_finite() -> Self {
        f64::MAX
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(z: T) -> T {
    let z = to_f64(z);
    lit((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal cumulative distribution.
pub fn norm_cdf<T: Scalar>(z: T) -> T {
    let z = to_f64(z);
    lit(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}

/// Standard normal quantile for `p` in (0, 1).
pub fn norm_quantile<T: Scalar>(p: T) -> T {
    let unit = Normal::standard();
    lit(unit.inverse_cdf(to_f64(p)))
}
