//! Taylor-expansion phase of the fiber under test.
//!
//! The propagation constant is expanded to third order about the degeneracy
//! frequency ω₀. Two accumulated phases are exposed: the summed signal+idler
//! phase seen by the converted light, where odd orders cancel under
//! anti-correlated detunings, and the single-beam phase of a classical
//! white-light interferometer. The classical form carries the first-order
//! term as `β⁽¹⁾Δω` (the usual Taylor term).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{Detuning, Wavelength, SPEED_OF_LIGHT};

/// Highest Taylor order stored for a fiber.
pub const MAX_TAYLOR_ORDER: usize = 3;

/// `1 ps/(nm·km)` expressed in s/m².
const PS_PER_NM_KM: f64 = 1e-6;

/// Fiber sample: length and Taylor coefficients of `k(ω)` about ω₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberUnderTest<T> {
    /// Length in meters.
    pub length: T,
    /// rad/m
    pub beta0: T,
    /// s/m
    pub beta1: T,
    /// s²/m
    pub beta2: T,
    /// s³/m
    pub beta3: T,
    /// Expansion point λ₀ (twice the pump wavelength).
    pub reference: Wavelength<T>,
}

impl<T: Scalar> FiberUnderTest<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.length.is_finite() || self.length <= T::zero() {
            return Err(Error::Config(format!("fiber length must be positive, got {} m", self.length)));
        }
        for (name, v) in [("beta0", self.beta0), ("beta1", self.beta1), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("fiber coefficient {name} is not finite")));
            }
        }
        Ok(())
    }

    /// Coefficients `[β⁽⁰⁾, β⁽¹⁾, β⁽²⁾, β⁽³⁾]`.
    pub fn coefficients(&self) -> [T; 4] {
        [self.beta0, self.beta1, self.beta2, self.beta3]
    }

    /// Dispersion parameter at the fiber's reference wavelength.
    pub fn dispersion(&self) -> DispersionParameter<T> {
        d_from_beta2(self.beta2, self.reference)
    }

    /// Copy with β⁽²⁾ set from a dispersion parameter at the reference.
    pub fn with_dispersion(mut self, d: DispersionParameter<T>) -> Self {
        self.beta2 = beta2_from_d(d, self.reference);
        self
    }
}

/// Chromatic dispersion `D` in ps/(nm·km).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DispersionParameter<T>(pub T);

impl<T: Scalar> DispersionParameter<T> {
    pub fn ps_per_nm_km(self) -> T {
        self.0
    }

    /// Value in SI units, s/m².
    pub fn si(self) -> T {
        self.0 * T::lit(PS_PER_NM_KM)
    }
}

/// `L · Σₙ Δωⁿ/n! · β⁽ⁿ⁾` for `n = 0..=max_order`.
pub fn taylor_phase<T: Scalar>(fiber: &FiberUnderTest<T>, delta: Detuning<T>, max_order: usize) -> Result<T> {
    if max_order > MAX_TAYLOR_ORDER {
        return Err(Error::UnsupportedOrder { requested: max_order, max: MAX_TAYLOR_ORDER });
    }
    let dw = delta.value();
    let coeffs = fiber.coefficients();
    let mut term = T::one();
    let mut sum = T::zero();
    for (n, beta) in coeffs.iter().enumerate().take(max_order + 1) {
        if n > 0 {
            term = term * dw / T::from_usize_lossy(n);
        }
        sum = sum + term * *beta;
    }
    Ok(fiber.length * sum)
}

/// Summed signal+idler phase `L(2β⁽⁰⁾ + β⁽²⁾Δω²)`.
///
/// β⁽¹⁾ and β⁽³⁾ never enter, so the result is bit-identical for any
/// odd-order coefficients.
pub fn quantum_like_phase<T: Scalar>(fiber: &FiberUnderTest<T>, delta: Detuning<T>) -> T {
    let dw = delta.value();
    fiber.length * (T::lit(2.0) * fiber.beta0 + fiber.beta2 * dw * dw)
}

/// Single-beam phase `L(β⁽⁰⁾ + β⁽¹⁾Δω + β⁽²⁾Δω²/2 + β⁽³⁾Δω³/6)`.
pub fn classical_phase<T: Scalar>(fiber: &FiberUnderTest<T>, delta: Detuning<T>) -> T {
    let dw = delta.value();
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    fiber.length * (fiber.beta0 + dw * (fiber.beta1 + dw * (half * fiber.beta2 + sixth * fiber.beta3 * dw)))
}

/// `D = −2πc·β⁽²⁾/λ₀²`.
pub fn d_from_beta2<T: Scalar>(beta2: T, lambda0: Wavelength<T>) -> DispersionParameter<T> {
    let l = lambda0.meters();
    let d_si = -T::TAU() * T::lit(SPEED_OF_LIGHT) * beta2 / (l * l);
    DispersionParameter(d_si / T::lit(PS_PER_NM_KM))
}

/// `β⁽²⁾ = −D·λ₀²/(2πc)`.
pub fn beta2_from_d<T: Scalar>(d: DispersionParameter<T>, lambda0: Wavelength<T>) -> T {
    let l = lambda0.meters();
    -d.si() * l * l / (T::TAU() * T::lit(SPEED_OF_LIGHT))
}
