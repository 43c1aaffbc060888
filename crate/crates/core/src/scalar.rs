//! Floating-point abstraction shared by every model in the crate.
//!
//! All physics and estimation code is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. The tolerances quoted in the tests are
//! for `f64`; `f32` is usable for the closed-form models but the least-squares
//! estimator needs the extra mantissa to reach sub-ppm dispersion precision.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by the forward models, the FFT and the fitter.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + rustfft::FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable as scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable as scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `sin(x)/x`, with the removable singularity filled in.
pub fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase<T: Scalar>(phi: T) -> T {
    let tau = T::TAU();
    let r = phi % tau;
    if r < T::zero() {
        r + tau
    } else {
        r
    }
}

/// Signed angular distance `a - b` folded into `(-π, π]`.
pub fn phase_distance<T: Scalar>(a: T, b: T) -> T {
    let d = wrap_phase(a - b);
    if d > T::PI() {
        d - T::TAU()
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_branches_agree() {
        for &x in &[0.0_f64, 1e-6, 9.9e-5, 1.01e-4, 0.5, 3.0] {
            let direct = if x == 0.0 { 1.0 } else { x.sin() / x };
            assert!((sinc(x) - direct).abs() < 1e-15, "x = {x}");
        }
        assert_eq!(sinc(0.0_f32), 1.0);
    }

    #[test]
    fn phase_wrapping() {
        let tau = std::f64::consts::TAU;
        assert!((wrap_phase(-0.5_f64) - (tau - 0.5)).abs() < 1e-15);
        assert!((wrap_phase(7.0_f64) - (7.0 - tau)).abs() < 1e-15);
        assert!((phase_distance(0.1_f64, tau - 0.1) - 0.2).abs() < 1e-14);
    }
}
