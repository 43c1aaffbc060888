//! Truncated-Fock check of super-resolved single-photon interference.
//!
//! A coherent state fed to an N-th harmonic (or sum-frequency) converter
//! comes out coherent with its phase multiplied by N (or with the signal and
//! idler phases summed). Placing a converter in each arm of a Mach-Zehnder
//! and keeping only the single converted photon's path degree of freedom
//! leaves a two-mode state `√η|S⟩ + √(1−η)e^{iNφ}|L⟩`, whose fringes at the
//! closing beam-splitter have period `2π/N` and visibility `2√(η(1−η))`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lsq::{self, LeastSquaresProblem, LmOptions};
use crate::scalar::Scalar;

/// Coherent-state amplitude with its Fock truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentAmplitude<T> {
    pub alpha: Complex<T>,
    pub n_max: usize,
}

impl<T: Scalar> CoherentAmplitude<T> {
    pub fn new(alpha: Complex<T>, n_max: usize) -> Result<Self> {
        let mean = alpha.norm_sqr();
        if n_max < 1 || !mean.is_finite() || mean > T::from_usize_lossy(n_max) / T::lit(4.0) {
            return Err(Error::Truncation { n_max, mean_photons: mean.to_f64_lossy() });
        }
        Ok(Self { alpha, n_max })
    }

    pub fn fock(&self) -> FockVector<T> {
        fock_coefficients(self.alpha, self.n_max)
    }
}

/// Amplitudes on `|0⟩ … |n_max⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    pub coefficients: Vec<Complex<T>>,
}

impl<T: Scalar> FockVector<T> {
    pub fn n_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn norm_sqr(&self) -> T {
        self.coefficients.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    pub fn mean_photon_number(&self) -> T {
        self.coefficients.iter().enumerate().fold(T::zero(), |acc, (n, c)| acc + T::from_usize_lossy(n) * c.norm_sqr())
    }
}

/// `ln n!` for `n = 0..=n_max`, by cumulative log sums.
fn ln_factorials<T: Scalar>(n_max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..=n_max {
        acc = acc + T::from_usize_lossy(k).ln();
        out.push(acc);
    }
    out
}

fn fock_coefficients<T: Scalar>(alpha: Complex<T>, n_max: usize) -> FockVector<T> {
    let mut coefficients = vec![Complex::new(T::zero(), T::zero()); n_max + 1];
    let r = alpha.norm();
    if r == T::zero() {
        coefficients[0] = Complex::new(T::one(), T::zero());
        return FockVector { coefficients };
    }
    let theta = alpha.arg();
    let ln_r = r.ln();
    let ln_fact = ln_factorials::<T>(n_max);
    let half = T::lit(0.5);
    for (n, c) in coefficients.iter_mut().enumerate() {
        let nf = T::from_usize_lossy(n);
        let ln_mag = -half * r * r + nf * ln_r - half * ln_fact[n];
        *c = Complex::from_polar(ln_mag.exp(), nf * theta);
    }
    FockVector { coefficients }
}

/// `cₙ = e^{−|α|²/2} αⁿ/√(n!)`, evaluated in log space.
pub fn coherent_fock<T: Scalar>(alpha: Complex<T>, n_max: usize) -> Result<FockVector<T>> {
    Ok(CoherentAmplitude::new(alpha, n_max)?.fock())
}

/// Output amplitude of a stimulated N-photon conversion: phase ×N, magnitude ×`gain`.
pub fn harmonic_phase_map<T: Scalar>(alpha_in: Complex<T>, order: usize, gain: T) -> Complex<T> {
    Complex::from_polar(gain * alpha_in.norm(), T::from_usize_lossy(order) * alpha_in.arg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConversionKind {
    /// N-th harmonic generation, N ≥ 1.
    Harmonic(usize),
    /// Signal + idler → pump; the phase argument is the summed phase.
    SumFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionSpec<T> {
    pub kind: ConversionKind,
    /// Relative conversion efficiency η of the short arm, in [0, 1].
    pub efficiency_ratio: T,
}

impl<T: Scalar> ConversionSpec<T> {
    pub fn harmonic(order: usize, efficiency_ratio: T) -> Self {
        Self { kind: ConversionKind::Harmonic(order), efficiency_ratio }
    }

    pub fn sum_frequency(efficiency_ratio: T) -> Self {
        Self { kind: ConversionKind::SumFrequency, efficiency_ratio }
    }

    fn phase_multiplier(&self) -> Result<T> {
        match self.kind {
            ConversionKind::Harmonic(0) => Err(Error::Domain("harmonic order must be at least 1".into())),
            ConversionKind::Harmonic(n) => Ok(T::from_usize_lossy(n)),
            ConversionKind::SumFrequency => Ok(T::one()),
        }
    }
}

/// Single converted photon shared between the short and long arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState<T> {
    pub amp_short: Complex<T>,
    pub amp_long: Complex<T>,
}

impl<T: Scalar> PathState<T> {
    pub fn norm_sqr(&self) -> T {
        self.amp_short.norm_sqr() + self.amp_long.norm_sqr()
    }
}

pub fn interferometer_state<T: Scalar>(phi: T, spec: &ConversionSpec<T>) -> Result<PathState<T>> {
    let eta = spec.efficiency_ratio;
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::Domain(format!("efficiency ratio must lie in [0, 1], got {eta}")));
    }
    let multiplier = spec.phase_multiplier()?;
    // √η and √(1−η) already carry unit total weight
    let amp_short = Complex::new(eta.sqrt(), T::zero());
    let amp_long = Complex::from_polar((T::one() - eta).sqrt(), multiplier * phi);
    Ok(PathState { amp_short, amp_long })
}

/// Output probabilities `p± = ½|a_S ± a_L|²` of a closing 50:50 splitter.
pub fn detection_probability<T: Scalar>(state: &PathState<T>) -> (T, T) {
    let half = T::lit(0.5);
    let plus = (state.amp_short + state.amp_long).norm_sqr() * half;
    let minus = (state.amp_short - state.amp_long).norm_sqr() * half;
    (plus, minus)
}

/// `2√(η(1−η))`.
pub fn visibility_law<T: Scalar>(eta: T) -> T {
    T::lit(2.0) * (eta * (T::one() - eta)).sqrt()
}

fn scan_phases<T: Scalar>(span: T, points: usize) -> Vec<T> {
    let step = span / T::from_usize_lossy(points);
    (0..points).map(|k| T::from_usize_lossy(k) * step).collect()
}

/// Contrast `(max−min)/(max+min)` of `p₊` over a φ grid that includes the
/// constructive (φ = 0) and destructive points of every harmonic order.
pub fn fringe_visibility<T: Scalar>(spec: &ConversionSpec<T>) -> Result<T> {
    let points = 4 * 840;
    let mut max = T::neg_infinity();
    let mut min = T::infinity();
    for phi in scan_phases(T::TAU(), points) {
        let (p, _) = detection_probability(&interferometer_state(phi, spec)?);
        max = max.max(p);
        min = min.min(p);
    }
    Ok((max - min) / (max + min))
}

/// `y ≈ a + b·cos(ωφ) + c·sin(ωφ)`
struct CosineFit<'a, T> {
    phi: &'a [T],
    y: &'a [T],
}

impl<T: Scalar> LeastSquaresProblem<T> for CosineFit<'_, T> {
    fn parameter_names(&self) -> Vec<String> {
        ["offset", "cos", "sin", "omega"].map(String::from).to_vec()
    }
    fn residual_count(&self) -> usize {
        self.y.len()
    }
    fn residuals(&self, x: &[T], out: &mut [T]) {
        for ((o, &phi), &y) in out.iter_mut().zip(self.phi).zip(self.y) {
            let (s, c) = (x[3] * phi).sin_cos();
            *o = x[0] + x[1] * c + x[2] * s - y;
        }
    }
    fn jacobian(&self, x: &[T], out: &mut [T]) {
        for (row, &phi) in out.chunks_exact_mut(4).zip(self.phi) {
            let (s, c) = (x[3] * phi).sin_cos();
            row[0] = T::one();
            row[1] = c;
            row[2] = s;
            row[3] = phi * (x[2] * c - x[1] * s);
        }
    }
}

fn spectral_magnitude<T: Scalar>(phi: &[T], y: &[T], omega: T) -> T {
    let (mut re, mut im) = (T::zero(), T::zero());
    for (&p, &v) in phi.iter().zip(y) {
        let (s, c) = (omega * p).sin_cos();
        re = re + v * c;
        im = im + v * s;
    }
    (re * re + im * im).sqrt()
}

/// Period in φ of the `p₊` fringe, measured by a least-squares cosine fit
/// to a dense scan over `[0, 4π)`.
pub fn fringe_period<T: Scalar>(spec: &ConversionSpec<T>) -> Result<T> {
    if !matches!(spec.kind, ConversionKind::Harmonic(_)) {
        return Err(Error::Domain("fringe period is defined for harmonic conversion only".into()));
    }
    let span = T::lit(4.0) * T::TAU() / T::lit(2.0);
    let phi = scan_phases(span, 2048);
    let mut y = Vec::with_capacity(phi.len());
    for &p in &phi {
        y.push(detection_probability(&interferometer_state(p, spec)?).0);
    }
    let mean = y.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(y.len());
    let centered: Vec<T> = y.iter().map(|&v| v - mean).collect();
    if centered.iter().all(|v| v.abs() < T::lit(1e-12)) {
        return Err(Error::Estimation("no fringe: visibility is zero".into()));
    }

    // coarse periodogram on a quarter-cycle grid, then golden-section refinement
    let d_omega = T::TAU() / span / T::lit(4.0);
    let mut best = (T::zero(), T::zero());
    let mut omega = d_omega * T::lit(2.0);
    while omega < T::lit(64.0) {
        let m = spectral_magnitude(&phi, &centered, omega);
        if m > best.1 {
            best = (omega, m);
        }
        omega = omega + d_omega;
    }
    let (mut lo, mut hi) = (best.0 - d_omega, best.0 + d_omega);
    let golden = T::lit(0.618_033_988_749_894_9);
    for _ in 0..60 {
        let a = hi - golden * (hi - lo);
        let b = lo + golden * (hi - lo);
        if spectral_magnitude(&phi, &centered, a) > spectral_magnitude(&phi, &centered, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let omega0 = (lo + hi) / T::lit(2.0);

    let problem = CosineFit { phi: &phi, y: &y };
    let opts = LmOptions { rss_floor: T::lit(1e-28), ..LmOptions::default() };
    let report = lsq::minimize(&problem, &[mean, T::zero(), T::zero(), omega0], &opts)?;
    if !report.converged {
        return Err(Error::NotConverged("cosine fit of the fringe scan".into()));
    }
    Ok(T::TAU() / report.params[3].abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

    fn harm(n: usize, eta: f64) -> ConversionSpec<f64> {
        ConversionSpec::harmonic(n, eta)
    }

    fn sfg(eta: f64) -> ConversionSpec<f64> {
        ConversionSpec::sum_frequency(eta)
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn vacuum() {
        let v = coherent_fock(c(0.0, 0.0), 5).unwrap();
        assert_eq!(v.coefficients[0], c(1.0, 0.0));
        assert!(v.coefficients[1..].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn poisson_moments_for_alpha_two() {
        let v = coherent_fock(c(2.0, 0.0), 40).unwrap();
        assert!(1.0 - v.norm_sqr() < 1e-10);
        assert!((v.mean_photon_number() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn large_truncation_does_not_overflow() {
        let v = coherent_fock(c(12.0, 5.0), 800).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-10);
        assert!((v.mean_photon_number() - 169.0).abs() < 1e-7);
    }

    #[test]
    fn truncation_guard() {
        assert!(matches!(coherent_fock(c(3.0, 0.0), 20), Err(Error::Truncation { .. })));
        assert!(matches!(coherent_fock(c(0.0, 0.0), 0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn phase_covariance() {
        let phi = 0.83;
        let a = coherent_fock(c(1.1, 0.4), 30).unwrap();
        let rot = Complex::from_polar(1.0, phi);
        let b = coherent_fock(c(1.1, 0.4) * rot, 30).unwrap();
        for (n, (x, y)) in a.coefficients.iter().zip(&b.coefficients).enumerate() {
            let expect = x * Complex::from_polar(1.0, n as f64 * phi);
            assert!((y - expect).norm() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn harmonic_phase() {
        assert_eq!(harmonic_phase_map(c(2.0, 0.0), 3, 1.0).arg(), 0.0);
        for phi in [0.1_f64, 1.0, 3.0] {
            let out = harmonic_phase_map(Complex::from_polar(1.5_f64, phi), 2, 1.0);
            let d = crate::scalar::phase_distance(out.arg(), 2.0 * phi);
            assert!(d.abs() < 1e-12, "phi = {phi}");
            assert!((out.norm() - 1.5).abs() < 1e-14);
            let same = harmonic_phase_map(Complex::from_polar(1.5, phi), 1, 1.0);
            assert!((same.arg() - phi).abs() < 1e-14);
        }
        assert!((harmonic_phase_map(c(2.0, 0.0), 2, 0.25).norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn balanced_state() {
        let s = interferometer_state(0.0, &harm(2, 0.5)).unwrap();
        assert!((s.amp_short - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amp_long - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let s = interferometer_state(PI / 2.0, &harm(2, 0.5)).unwrap();
        let rel = s.amp_long / s.amp_short;
        assert!((rel - c(-1.0, 0.0)).norm() < 1e-15);
        let s = interferometer_state(0.4, &harm(2, 1.0)).unwrap();
        assert_eq!(s.amp_long.norm(), 0.0);
        assert!(interferometer_state(0.0, &harm(2, 1.2)).is_err());
        assert!(interferometer_state(0.0, &harm(0, 0.5)).is_err());
    }

    #[test]
    fn sum_frequency_uses_summed_phase() {
        let s = interferometer_state(1.3, &sfg(0.5)).unwrap();
        assert!((s.amp_long.arg() - 1.3).abs() < 1e-15);
        assert!(fringe_period(&sfg(0.5)).is_err());
    }

    #[test]
    fn output_ports() {
        let spec = harm(2, 0.5);
        let (p, m) = detection_probability(&interferometer_state(0.0, &spec).unwrap());
        assert!((p - 1.0).abs() < 1e-15 && m.abs() < 1e-15);
        let (p, m) = detection_probability(&interferometer_state(PI / 2.0, &spec).unwrap());
        assert!(p.abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn imbalance_visibility() {
        let v = fringe_visibility(&harm(1, 0.9)).unwrap();
        assert!((v - 0.6).abs() < 1e-9);
        for k in 0..=10 {
            let eta = k as f64 / 10.0;
            for n in 1..=4 {
                let v = fringe_visibility(&harm(n, eta)).unwrap();
                assert!((v - visibility_law(eta)).abs() < 1e-9, "eta = {eta}, N = {n}");
            }
        }
    }

    #[test]
    fn super_resolved_periods() {
        for n in 1..=4 {
            let period = fringe_period(&harm(n, 0.5)).unwrap();
            let want = TAU / n as f64;
            assert!(((period - want) / want).abs() < 1e-6, "N = {n}: {period}");
        }
        // imbalanced arms shrink the contrast but not the period
        let period = fringe_period(&harm(3, 0.8)).unwrap();
        assert!(((period - TAU / 3.0) / (TAU / 3.0)).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn probabilities_sum_to_one(eta in 0.0_f64..=1.0, phi in -10.0_f64..10.0, n in 1usize..6) {
            let s = interferometer_state(phi, &harm(n, eta)).unwrap();
            let (p, m) = detection_probability(&s);
            proptest::prop_assert!((p + m - 1.0).abs() <= 1e-12);
            proptest::prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn coherent_norm(re in -3.0_f64..3.0, im in -3.0_f64..3.0) {
            let v = coherent_fock(c(re, im), 80).unwrap();
            let n = v.norm_sqr();
            proptest::prop_assert!((1.0 - 1e-8..=1.0 + 1e-12).contains(&n), "norm {n}");
        }
    }
}
