// `!(x > 0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod estimator;
pub mod interferogram;
pub mod lsq;
pub mod noon;
pub mod phase_matching;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the common case.
pub type Wavelength = spectral::Wavelength<f64>;
pub type AngularFrequency = spectral::AngularFrequency<f64>;
pub type Detuning = spectral::Detuning<f64>;
pub type SweepGrid = spectral::SweepGrid<f64>;
pub type FiberUnderTest = dispersion::FiberUnderTest<f64>;
pub type DispersionParameter = dispersion::DispersionParameter<f64>;
pub type ParametricProcess = phase_matching::ParametricProcess<f64>;
pub type EnvelopeModel = phase_matching::EnvelopeModel<f64>;
pub type Interferogram = interferogram::Interferogram<f64>;
pub type SynthesisConfig = interferogram::SynthesisConfig<f64>;
pub type NoiseConfig = interferogram::NoiseConfig<f64>;
pub type FitModel = estimator::FitModel<f64>;
pub type FitOptions = estimator::FitOptions<f64>;
pub type FitResult = estimator::FitResult<f64>;
pub type Scenario = estimator::Scenario<f64>;
pub type McSummary = estimator::McSummary<f64>;
