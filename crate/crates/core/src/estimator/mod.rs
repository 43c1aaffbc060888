//! Chromatic-dispersion extraction from interferograms.
//!
//! The estimator fits
//! `I(λ) = B + A·g(λ)·½[1 + V·v(λ)·cos(β₂L·Δω² + φ₀)]`
//! to a trace, with the acceptance envelope `g` and arm-contrast ceiling `v`
//! taken from the configured crystals. `β₂L` then converts to `D` at the
//! degeneracy wavelength. The model is even under `(β₂L, φ₀) → (−β₂L, −φ₀)`,
//! so the sign of the dispersion is a convention set by the initial guess.

mod fit;
mod guess;
mod monte_carlo;

pub use fit::{fit, FitOptions, FitResult, PARAMETER_NAMES};
pub use guess::{dominant_fringe_frequency, initial_guess, SpectralPeak};
pub use monte_carlo::{histogram_freedman_diaconis, monte_carlo, GaussianOverlay, Histogram, McSummary, ScanFailure, Scenario};

use serde::{Deserialize, Serialize};

use crate::dispersion::{d_from_beta2, DispersionParameter};
use crate::error::{Error, Result};
use crate::phase_matching::EnvelopeModel;
use crate::scalar::Scalar;
use crate::spectral::{detuning_from_degeneracy, Wavelength};

/// Parameters of the fringe model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitModel<T> {
    pub amplitude: T,
    pub offset: T,
    pub visibility: T,
    /// `L·β⁽²⁾` in s².
    pub beta2l: T,
    /// Constant fringe phase `2Lβ⁽⁰⁾`, reported in `[0, 2π)`.
    pub phi0: T,
    pub pump: Wavelength<T>,
    pub envelope: EnvelopeModel<T>,
}

impl<T: Scalar> FitModel<T> {
    /// Model intensity at one wavelength.
    pub fn intensity(&self, lambda: Wavelength<T>) -> Result<T> {
        let dw = detuning_from_degeneracy(lambda, self.pump)?.value();
        let g = self.envelope.gain(lambda);
        let v = self.envelope.arm_visibility(lambda);
        let phase = self.beta2l * dw * dw + self.phi0;
        Ok(self.offset + self.amplitude * g * T::lit(0.5) * (T::one() + self.visibility * v * phase.cos()))
    }

    pub fn with_sign_flipped(mut self) -> Self {
        self.beta2l = -self.beta2l;
        self.phi0 = crate::scalar::wrap_phase(-self.phi0);
        self
    }
}

/// Pump and crystal acceptances shared by guess and fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSetup<T> {
    pub pump: Wavelength<T>,
    pub envelope: EnvelopeModel<T>,
}

/// Dispersion extracted from one fit, with 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimate<T> {
    pub dispersion: DispersionParameter<T>,
    pub dispersion_sigma: T,
    /// s²/m
    pub beta2: T,
    pub beta2_sigma: T,
}

/// `β⁽²⁾ = β₂L/L`, then `D` at `lambda0`.
pub fn extract_cd<T: Scalar>(result: &FitResult<T>, fiber_length: T, lambda0: Wavelength<T>) -> Result<DispersionEstimate<T>> {
    if !result.converged {
        return Err(Error::NotConverged(format!(
            "refusing to extract dispersion from an unconverged fit ({:?} after {} iterations)",
            result.termination, result.iterations
        )));
    }
    if !(fiber_length > T::zero()) || !fiber_length.is_finite() {
        return Err(Error::Config(format!("fiber length must be positive, got {fiber_length}")));
    }
    let beta2 = result.model.beta2l / fiber_length;
    let beta2_sigma = result.std_error("beta2L").unwrap_or(T::nan()) / fiber_length;
    let dispersion = d_from_beta2(beta2, lambda0);
    let dispersion_sigma = d_from_beta2(beta2_sigma, lambda0).ps_per_nm_km().abs();
    Ok(DispersionEstimate { dispersion, dispersion_sigma, beta2, beta2_sigma })
}
