//! Scalar abstraction for the closed-form parts of the model.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the analytic routines: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target float type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `(1 - e^{-x}) / x`, continuous at `x = 0`.
///
/// Every closed form with a `1/(κ - 4γ)` factor is routed through this so the
/// removable singularity at `κ = 4γ` never divides by zero.
#[inline]
pub(crate) fn one_minus_exp_over<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-5) {
        // second order series
        T::one() - x / T::lit(2.0) + x * x / T::lit(6.0)
    } else {
        -(-x).exp_m1() / x
    }
}

#[inline]
pub(crate) fn clamp_unit<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_direct_near_threshold() {
        for &x in &[9.9e-6_f64, -9.9e-6, 1.1e-5, -1.1e-5] {
            let direct = -(-x).exp_m1() / x;
            assert!((one_minus_exp_over(x) - direct).abs() < 1e-15);
        }
        assert_eq!(one_minus_exp_over(0.0_f64), 1.0);
    }

    #[test]
    fn works_for_f32() {
        let v: f32 = one_minus_exp_over(1.0_f32);
        assert!((v - (1.0 - (-1.0_f32).exp())).abs() < 1e-6);
    }
}
