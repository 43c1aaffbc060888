//! Wavelength and frequency bookkeeping about the degeneracy point.
//!
//! Quantities are stored in SI units (meters, rad/s, seconds). Nanometers
//! only appear in constructors and accessors suffixed `_nm`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const NM: f64 = 1e-9;

/// Vacuum wavelength, stored in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength<T>(T);

impl<T: Scalar> Wavelength<T> {
    pub fn from_meters(m: T) -> Result<Self> {
        if !m.is_finite() || m <= T::zero() {
            return Err(Error::Domain(format!("wavelength must be positive and finite, got {m} m")));
        }
        Ok(Self(m))
    }

    pub fn from_nm(nm: T) -> Result<Self> {
        Self::from_meters(nm * T::lit(NM))
            .map_err(|_| Error::Domain(format!("wavelength must be positive and finite, got {nm} nm")))
    }

    pub fn meters(self) -> T {
        self.0
    }

    pub fn nm(self) -> T {
        self.0 / T::lit(NM)
    }

    pub fn to_omega(self) -> AngularFrequency<T> {
        wavelength_to_omega(self)
    }
}

/// Angular frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AngularFrequency<T>(T);

impl<T: Scalar> AngularFrequency<T> {
    pub fn new(rad_per_s: T) -> Result<Self> {
        if !rad_per_s.is_finite() || rad_per_s <= T::zero() {
            return Err(Error::Domain(format!("angular frequency must be positive and finite, got {rad_per_s} rad/s")));
        }
        Ok(Self(rad_per_s))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_wavelength(self) -> Wavelength<T> {
        // c and a positive finite ω always give a positive finite λ
        Wavelength(T::TAU() * T::lit(SPEED_OF_LIGHT) / self.0)
    }
}

/// Signed offset from the degeneracy frequency ω₀ = ω_p / 2, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Detuning<T>(T);

impl<T: Scalar> Detuning<T> {
    /// Builds a detuning and checks `|value| < omega0`.
    pub fn new(value: T, omega0: AngularFrequency<T>) -> Result<Self> {
        if !value.is_finite() || value.abs() >= omega0.value() {
            return Err(Error::Domain(format!(
                "detuning {value} rad/s outside the physical band |Δω| < ω₀ = {}",
                omega0.value()
            )));
        }
        Ok(Self(value))
    }

    /// Unchecked detuning, for model evaluation at arbitrary offsets.
    pub fn raw(value: T) -> Self {
        Self(value)
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<T: Scalar> std::ops::Neg for Detuning<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

/// `ω = 2πc/λ`.
pub fn wavelength_to_omega<T: Scalar>(lambda: Wavelength<T>) -> AngularFrequency<T> {
    AngularFrequency(T::TAU() * T::lit(SPEED_OF_LIGHT) / lambda.meters())
}

/// Wavelength of the idler that completes `ω_s + ω_i = ω_p`.
pub fn idler_wavelength<T: Scalar>(pump: Wavelength<T>, signal: Wavelength<T>) -> Result<Wavelength<T>> {
    let wp = wavelength_to_omega(pump).value();
    let ws = wavelength_to_omega(signal).value();
    if ws >= wp {
        return Err(Error::Domain(format!(
            "signal at {} nm is not below the pump frequency ({} nm): no idler exists",
            signal.nm(),
            pump.nm()
        )));
    }
    Ok(AngularFrequency(wp - ws).to_wavelength())
}

/// Half the pump frequency.
pub fn degeneracy_omega<T: Scalar>(pump: Wavelength<T>) -> AngularFrequency<T> {
    AngularFrequency(wavelength_to_omega(pump).value() / T::lit(2.0))
}

/// `ω(λ) − ω(λ_p)/2`. Fails when λ is at or below the pump wavelength.
pub fn detuning_from_degeneracy<T: Scalar>(lambda: Wavelength<T>, pump: Wavelength<T>) -> Result<Detuning<T>> {
    let omega0 = degeneracy_omega(pump);
    Detuning::new(wavelength_to_omega(lambda).value() - omega0.value(), omega0)
}

/// Linear wavelength ramp of a tunable laser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid<T> {
    pub lambda_start: Wavelength<T>,
    pub lambda_stop: Wavelength<T>,
    pub n_samples: usize,
    /// Ramp speed in nm/s.
    pub speed_nm_per_s: T,
}

/// One sample of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<T> {
    pub time_s: T,
    pub wavelength: Wavelength<T>,
}

impl<T: Scalar> SweepGrid<T> {
    pub fn new(lambda_start: Wavelength<T>, lambda_stop: Wavelength<T>, n_samples: usize, speed_nm_per_s: T) -> Result<Self> {
        let grid = Self { lambda_start, lambda_stop, n_samples, speed_nm_per_s };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_nm(start_nm: T, stop_nm: T, n_samples: usize, speed_nm_per_s: T) -> Result<Self> {
        let start = Wavelength::from_nm(start_nm).map_err(|e| Error::Config(e.to_string()))?;
        let stop = Wavelength::from_nm(stop_nm).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(start, stop, n_samples, speed_nm_per_s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_start < self.lambda_stop) {
            return Err(Error::Config(format!(
                "sweep start {} nm must be below stop {} nm",
                self.lambda_start.nm(),
                self.lambda_stop.nm()
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::Config(format!("sweep needs at least 2 samples, got {}", self.n_samples)));
        }
        if !self.speed_nm_per_s.is_finite() || self.speed_nm_per_s <= T::zero() {
            return Err(Error::Config(format!("sweep speed must be positive, got {} nm/s", self.speed_nm_per_s)));
        }
        Ok(())
    }

    pub fn span_nm(&self) -> T {
        self.lambda_stop.nm() - self.lambda_start.nm()
    }

    /// Duration of the ramp in seconds.
    pub fn duration_s(&self) -> T {
        self.span_nm() / self.speed_nm_per_s
    }

    /// Wavelength reached `t` seconds after the ramp trigger.
    pub fn wavelength_at(&self, t: T) -> Wavelength<T> {
        Wavelength((self.lambda_start.nm() + self.speed_nm_per_s * t) * T::lit(NM))
    }
}

/// Samples the ramp at `n_samples` equally spaced instants, endpoints included.
pub fn make_sweep<T: Scalar>(grid: &SweepGrid<T>) -> Result<Vec<SweepPoint<T>>> {
    grid.validate()?;
    let n = grid.n_samples;
    let start = grid.lambda_start.nm();
    let span = grid.span_nm();
    let duration = grid.duration_s();
    let last = T::from_usize_lossy(n - 1);
    Ok((0..n)
        .map(|k| {
            let frac = T::from_usize_lossy(k) / last;
            let lambda_nm = if k == n - 1 { grid.lambda_stop.nm() } else { start + span * frac };
            SweepPoint { time_s: duration * frac, wavelength: Wavelength(lambda_nm * T::lit(NM)) }
        })
        .collect())
}
