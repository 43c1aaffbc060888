//! sinc² acceptance of the three-wave processes in the setup.
//!
//! Each crystal is reduced to a linear phase-mismatch model
//! `Δk = s·(ω(λ) − ω(λ_c))`, which reproduces the shape of a measured
//! acceptance from a single width parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sinc, Scalar};
use crate::spectral::{make_sweep, wavelength_to_omega, SweepGrid, Wavelength};

/// Root of `sinc²(x) = ½`.
pub const HALF_MAX_ARGUMENT: f64 = 1.391_557_378_251_510_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessKind {
    Dfg,
    SfgArm1,
    SfgArm2,
    Shg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricProcess<T> {
    pub kind: ProcessKind,
    /// Signal wavelength of perfect phase matching.
    pub center: Wavelength<T>,
    /// dΔk/dω in rad/m per rad/s.
    pub mismatch_slope: T,
    /// Meters.
    pub crystal_length: T,
}

impl<T: Scalar> ParametricProcess<T> {
    pub fn new(kind: ProcessKind, center: Wavelength<T>, mismatch_slope: T, crystal_length: T) -> Result<Self> {
        let p = Self { kind, center, mismatch_slope, crystal_length };
        p.validate()?;
        Ok(p)
    }

    /// Chooses the slope so that the acceptance drops to ½ at `center ± fwhm/2`.
    pub fn with_fwhm(kind: ProcessKind, center: Wavelength<T>, fwhm_nm: T, crystal_length: T) -> Result<Self> {
        if !fwhm_nm.is_finite() || fwhm_nm <= T::zero() || fwhm_nm >= T::lit(2.0) * center.nm() {
            return Err(Error::Config(format!(
                "{kind:?}: acceptance FWHM must be positive and below 2·center, got {fwhm_nm} nm"
            )));
        }
        if !crystal_length.is_finite() || crystal_length <= T::zero() {
            return Err(Error::Config(format!("{kind:?}: crystal length must be positive, got {crystal_length} m")));
        }
        let half = fwhm_nm / T::lit(2.0);
        let blue = wavelength_to_omega(Wavelength::from_nm(center.nm() - half)?).value();
        let red = wavelength_to_omega(Wavelength::from_nm(center.nm() + half)?).value();
        let slope = T::lit(4.0 * HALF_MAX_ARGUMENT) / (crystal_length * (blue - red));
        Self::new(kind, center, slope, crystal_length)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.crystal_length.is_finite() || self.crystal_length <= T::zero() {
            return Err(Error::Config(format!(
                "{:?}: crystal length must be positive, got {} m",
                self.kind, self.crystal_length
            )));
        }
        if !self.mismatch_slope.is_finite() {
            return Err(Error::Config(format!("{:?}: mismatch slope must be finite", self.kind)));
        }
        Ok(())
    }

    /// Half-maximum width in angular frequency, infinite for a zero slope.
    pub fn fwhm_omega(&self) -> T {
        T::lit(4.0 * HALF_MAX_ARGUMENT) / (self.mismatch_slope.abs() * self.crystal_length)
    }
}

/// `Δk = s·(ω(λ_s) − ω(λ_c))`, rad/m.
pub fn delta_k<T: Scalar>(process: &ParametricProcess<T>, lambda_s: Wavelength<T>) -> T {
    process.mismatch_slope * (wavelength_to_omega(lambda_s).value() - wavelength_to_omega(process.center).value())
}

/// Normalized conversion efficiency `sinc²(Δk·L/2)`.
pub fn acceptance<T: Scalar>(process: &ParametricProcess<T>, lambda_s: Wavelength<T>) -> T {
    let s = sinc(delta_k(process, lambda_s) * process.crystal_length / T::lit(2.0));
    s * s
}

pub fn envelope_product<T: Scalar>(dfg: &ParametricProcess<T>, sfg: &ParametricProcess<T>, lambda_s: Wavelength<T>) -> T {
    acceptance(dfg, lambda_s) * acceptance(sfg, lambda_s)
}

/// Largest parasitic SHG efficiency, relative to its peak, met along a sweep.
pub fn shg_suppression<T: Scalar>(shg: &ParametricProcess<T>, sweep: &SweepGrid<T>) -> Result<T> {
    let peak = acceptance(shg, shg.center);
    let worst = make_sweep(sweep)?.iter().map(|p| acceptance(shg, p.wavelength)).fold(T::zero(), T::max);
    Ok(worst / peak)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceCurve<T> {
    pub samples: Vec<(Wavelength<T>, T)>,
}

pub fn acceptance_curve<T: Scalar>(process: &ParametricProcess<T>, wavelengths: &[Wavelength<T>]) -> AcceptanceCurve<T> {
    AcceptanceCurve { samples: wavelengths.iter().map(|&l| (l, acceptance(process, l))).collect() }
}

/// The DFG crystal and the two SFG crystals inside the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeModel<T> {
    pub dfg: ParametricProcess<T>,
    pub sfg_arm1: ParametricProcess<T>,
    pub sfg_arm2: ParametricProcess<T>,
}

impl<T: Scalar> EnvelopeModel<T> {
    /// Mean converted power `a_DFG·(a₁ + a₂)/2`; equals the plain product when the arms match.
    pub fn gain(&self, lambda: Wavelength<T>) -> T {
        let a1 = acceptance(&self.sfg_arm1, lambda);
        let a2 = acceptance(&self.sfg_arm2, lambda);
        acceptance(&self.dfg, lambda) * (a1 + a2) / T::lit(2.0)
    }

    /// Short-arm share `η = a₁/(a₁ + a₂)`.
    pub fn efficiency_ratio(&self, lambda: Wavelength<T>) -> T {
        let a1 = acceptance(&self.sfg_arm1, lambda);
        let a2 = acceptance(&self.sfg_arm2, lambda);
        if a1 + a2 > T::zero() {
            a1 / (a1 + a2)
        } else {
            T::lit(0.5)
        }
    }

    /// Contrast ceiling `2√(η(1−η))` set by unequal arm conversion.
    pub fn arm_visibility(&self, lambda: Wavelength<T>) -> T {
        let a1 = acceptance(&self.sfg_arm1, lambda);
        let a2 = acceptance(&self.sfg_arm2, lambda);
        if a1 + a2 > T::zero() {
            T::lit(2.0) * (a1 * a2).sqrt() / (a1 + a2)
        } else {
            T::zero()
        }
    }

    /// True when λ lies inside the main lobe (first nulls) of either SFG crystal.
    pub fn in_sfg_main_lobe(&self, lambda: Wavelength<T>) -> bool {
        [self.sfg_arm1, self.sfg_arm2].iter().any(|p| (delta_k(p, lambda) * p.crystal_length / T::lit(2.0)).abs() < T::PI())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nm(x: f64) -> Wavelength<f64> {
        Wavelength::from_nm(x).unwrap()
    }

    fn sfg() -> ParametricProcess<f64> {
        ParametricProcess::with_fwhm(ProcessKind::SfgArm1, nm(1540.0), 24.0, 0.03).unwrap()
    }

    /// null of the sinc at x = Δk L/2, solved for λ
    fn wavelength_at_argument(p: &ParametricProcess<f64>, x: f64) -> Wavelength<f64> {
        let dw = 2.0 * x / (p.mismatch_slope * p.crystal_length);
        crate::spectral::AngularFrequency::new(wavelength_to_omega(p.center).value() + dw).unwrap().to_wavelength()
    }

    #[test]
    fn half_max_constant_matches_bisection() {
        let f = |x: f64| (x.sin() / x).powi(2) - 0.5;
        let (mut lo, mut hi) = (1.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - HALF_MAX_ARGUMENT).abs() < 1e-14);
        assert!((lo - 1.39156).abs() < 1e-5);
    }

    #[test]
    fn detuning_model() {
        let p = sfg();
        assert_eq!(delta_k(&p, p.center), 0.0);
        let blue = delta_k(&p, nm(1530.0));
        let red = delta_k(&p, nm(1550.0));
        assert!(blue > 0.0 && red < 0.0);
        let dw = wavelength_to_omega(nm(1530.0)).value() - wavelength_to_omega(p.center).value();
        assert!((blue - p.mismatch_slope * dw).abs() <= 1e-12 * blue.abs());
    }

    #[test]
    fn acceptance_landmarks() {
        let p = sfg();
        assert_eq!(acceptance(&p, p.center), 1.0);
        assert!(acceptance(&p, wavelength_at_argument(&p, std::f64::consts::PI)) < 1e-20);
        let at_half = acceptance(&p, wavelength_at_argument(&p, HALF_MAX_ARGUMENT));
        assert!((at_half - 0.5).abs() < 1e-12);
        // half-max points are symmetric in ω, so only approximately in λ
        let blue = wavelength_at_argument(&p, HALF_MAX_ARGUMENT).nm();
        let red = wavelength_at_argument(&p, -HALF_MAX_ARGUMENT).nm();
        assert!(((red - blue) - 24.0).abs() < 0.02, "{blue} .. {red}");
        assert!((acceptance(&p, nm(1528.0)) - 0.5).abs() < 2e-2);
    }

    #[test]
    fn envelope_product_rules() {
        let dfg = ParametricProcess::with_fwhm(ProcessKind::Dfg, nm(1540.0), 40.0, 0.02).unwrap();
        let s = sfg();
        assert_eq!(envelope_product(&dfg, &s, nm(1540.0)), 1.0);
        let null = wavelength_at_argument(&s, std::f64::consts::PI);
        assert!(envelope_product(&dfg, &s, null) < 1e-20);
        for l in [1531.0, 1537.5, 1549.0] {
            assert_eq!(envelope_product(&dfg, &s, nm(l)), envelope_product(&s, &dfg, nm(l)));
        }
    }

    #[test]
    fn shg_sweep_check() {
        let sweep = SweepGrid::from_nm(1535.0, 1545.0, 2001, 100.0).unwrap();
        let centered = ParametricProcess::with_fwhm(ProcessKind::Shg, nm(1540.0), 1.0, 0.03).unwrap();
        assert!((shg_suppression(&centered, &sweep).unwrap() - 1.0).abs() < 1e-12);

        // SHG lobe far enough that the sweep starts beyond its third null
        let shg = ParametricProcess::with_fwhm(ProcessKind::Shg, nm(1560.6), 0.6, 0.03).unwrap();
        let third_null = wavelength_at_argument(&shg, 3.0 * std::f64::consts::PI);
        assert!(third_null.nm() > 1545.0);
        let ratio = shg_suppression(&shg, &sweep).unwrap();
        // the sinc² tail is bounded by 1/x² at the closest point of the sweep
        let x_min = (delta_k(&shg, nm(1545.0)) * shg.crystal_length / 2.0).abs();
        assert!(ratio <= 1.0 / (x_min * x_min));
        assert!(ratio < 0.05, "ratio = {ratio}");

        let edge = ParametricProcess::with_fwhm(ProcessKind::Shg, nm(1543.0), 0.6, 0.03).unwrap();
        assert!(shg_suppression(&edge, &sweep).unwrap() > 0.1);
    }

    #[test]
    fn arm_mismatch_visibility() {
        let dfg = ParametricProcess::with_fwhm(ProcessKind::Dfg, nm(1540.0), 40.0, 0.02).unwrap();
        let a1 = sfg();
        let a2 = ParametricProcess::with_fwhm(ProcessKind::SfgArm2, nm(1543.0), 20.0, 0.03).unwrap();
        let env = EnvelopeModel { dfg, sfg_arm1: a1, sfg_arm2: a2 };
        for l in [1535.0, 1538.2, 1545.0] {
            let eta = env.efficiency_ratio(nm(l));
            let law = crate::noon::visibility_law(eta);
            assert!((env.arm_visibility(nm(l)) - law).abs() < 1e-12);
        }
        let same = EnvelopeModel { dfg, sfg_arm1: a1, sfg_arm2: ParametricProcess { kind: ProcessKind::SfgArm2, ..a1 } };
        assert_eq!(same.arm_visibility(nm(1537.0)), 1.0);
        assert_eq!(same.gain(nm(1537.0)), envelope_product(&dfg, &a1, nm(1537.0)));
    }

    #[test]
    fn rejects_bad_processes() {
        assert!(ParametricProcess::with_fwhm(ProcessKind::Dfg, nm(1540.0), -1.0, 0.02).is_err());
        assert!(ParametricProcess::with_fwhm(ProcessKind::Dfg, nm(1540.0), 10.0, 0.0).is_err());
        assert!(ParametricProcess::new(ProcessKind::Dfg, nm(1540.0), f64::NAN, 0.02).is_err());
    }

    proptest::proptest! {
        #[test]
        fn acceptance_bounded_and_even(x in -40.0_f64..40.0) {
            let p = sfg();
            let a = acceptance(&p, wavelength_at_argument(&p, x));
            let b = acceptance(&p, wavelength_at_argument(&p, -x));
            proptest::prop_assert!((0.0..=1.0).contains(&a));
            proptest::prop_assert!((a - b).abs() < 1e-9);
            if x.abs() > 1e-3 {
                proptest::prop_assert!(a < 1.0);
            }
        }
    }
}
