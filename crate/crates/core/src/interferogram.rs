//! Forward model of the detected trace along a wavelength sweep.
//!
//! The converted-light intensity is
//! `I(λ) = B + A·g(λ)·½[1 + V·v(λ)·cos φ(λ)]`, where `g` is the DFG×SFG
//! acceptance, `v` the contrast ceiling from unequal SFG arms, and
//! `φ = L(2β⁽⁰⁾ + β⁽²⁾Δω²)` the summed signal+idler fiber phase.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dispersion::{quantum_like_phase, FiberUnderTest};
use crate::error::{Error, Result};
use crate::phase_matching::EnvelopeModel;
use crate::rng::scan_rng;
use crate::scalar::Scalar;
use crate::spectral::{detuning_from_degeneracy, make_sweep, SweepGrid, Wavelength};

/// Relative disagreement allowed between a trace duration and its sweep.
pub const CALIBRATION_TOLERANCE: f64 = 0.01;

pub const TRACE_HEADER: [&str; 3] = ["time_s", "lambda_nm", "intensity"];

/// Where a trace came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub origin: String,
    pub seed: Option<u64>,
    pub scan_index: Option<u64>,
    pub warnings: Vec<String>,
}

/// Noiseless decomposition `I = baseline + modulation·cos(phase)`, kept for
/// synthesized traces so that phase drift can be applied after the fact.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeComponents<T> {
    pub baseline: Vec<T>,
    pub modulation: Vec<T>,
    pub phase: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram<T> {
    pub time_s: Vec<T>,
    pub lambda_nm: Vec<T>,
    pub intensity: Vec<T>,
    pub meta: TraceMeta,
    pub components: Option<FringeComponents<T>>,
}

impl<T: Scalar> Interferogram<T> {
    pub fn new(time_s: Vec<T>, lambda_nm: Vec<T>, intensity: Vec<T>, meta: TraceMeta) -> Result<Self> {
        let n = time_s.len();
        if n < 2 || lambda_nm.len() != n || intensity.len() != n {
            return Err(Error::Trace(format!(
                "trace columns must have equal length ≥ 2 (time {n}, lambda {}, intensity {})",
                lambda_nm.len(),
                intensity.len()
            )));
        }
        let increasing = lambda_nm.windows(2).all(|w| w[1] > w[0]);
        let decreasing = lambda_nm.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Trace("wavelength axis must be strictly monotonic".into()));
        }
        if let Some(k) = intensity.iter().position(|v| !v.is_finite()) {
            return Err(Error::Trace(format!("intensity sample {k} is not finite")));
        }
        if let Some(k) = lambda_nm.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(Error::Trace(format!("wavelength sample {k} is not a positive number")));
        }
        Ok(Self { time_s, lambda_nm, intensity, meta, components: None })
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = Wavelength<T>> + '_ {
        // validated positive on construction
        self.lambda_nm.iter().map(|&l| Wavelength::from_nm(l).expect("validated wavelength"))
    }

    /// Copy with the intensity multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        let mut out = self.clone();
        out.intensity.iter_mut().for_each(|v| *v = *v * k);
        out.components = None;
        out
    }
}

/// Everything the forward model needs for one scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig<T> {
    pub fiber: FiberUnderTest<T>,
    pub pump: Wavelength<T>,
    pub envelope: EnvelopeModel<T>,
    pub sweep: SweepGrid<T>,
    pub amplitude: T,
    pub offset: T,
    /// Extra contrast factor on top of the arm-balance limit.
    pub visibility: T,
}

impl<T: Scalar> SynthesisConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        self.sweep.validate()?;
        for p in [&self.envelope.dfg, &self.envelope.sfg_arm1, &self.envelope.sfg_arm2] {
            p.validate()?;
        }
        if !(self.amplitude > T::zero()) || !self.amplitude.is_finite() {
            return Err(Error::Config(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.offset >= T::zero()) || !self.offset.is_finite() {
            return Err(Error::Config(format!("offset must be non-negative, got {}", self.offset)));
        }
        if !(self.visibility >= T::zero() && self.visibility <= T::one()) {
            return Err(Error::Config(format!("visibility must lie in [0, 1], got {}", self.visibility)));
        }
        if self.sweep.lambda_start <= self.pump {
            return Err(Error::Config("sweep must lie on the red side of the pump".into()));
        }
        Ok(())
    }
}

/// Noiseless trace along the configured sweep.
pub fn synthesize<T: Scalar>(cfg: &SynthesisConfig<T>) -> Result<Interferogram<T>> {
    cfg.validate()?;
    let points = make_sweep(&cfg.sweep)?;
    let n = points.len();
    let half = T::lit(0.5);
    let mut time_s = Vec::with_capacity(n);
    let mut lambda_nm = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    let mut baseline = Vec::with_capacity(n);
    let mut modulation = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut any_in_lobe = false;
    for p in &points {
        let delta = detuning_from_degeneracy(p.wavelength, cfg.pump)?;
        let phi = quantum_like_phase(&cfg.fiber, delta);
        let gain = cfg.envelope.gain(p.wavelength);
        let contrast = cfg.visibility * cfg.envelope.arm_visibility(p.wavelength);
        let b = cfg.offset + cfg.amplitude * gain * half;
        let m = cfg.amplitude * gain * contrast * half;
        any_in_lobe |= cfg.envelope.in_sfg_main_lobe(p.wavelength);
        time_s.push(p.time_s);
        lambda_nm.push(p.wavelength.nm());
        intensity.push(b + m * phi.cos());
        baseline.push(b);
        modulation.push(m);
        phase.push(phi);
    }
    let mut meta = TraceMeta { origin: "synthesized".into(), ..TraceMeta::default() };
    if !any_in_lobe {
        meta.warnings.push("sweep lies outside both SFG acceptance main lobes; pattern unmeasurable".into());
    }
    let mut trace = Interferogram::new(time_s, lambda_nm, intensity, meta)?;
    trace.components = Some(FringeComponents { baseline, modulation, phase });
    Ok(trace)
}

/// Attaches the ramp wavelength to a triggered `(time, intensity)` record.
///
/// Time is counted from the first sample (the trigger), so
/// `λ(t) = λ_start + speed·(t − t₀)`.
pub fn calibrate<T: Scalar>(time_trace: &[(T, T)], sweep: &SweepGrid<T>) -> Result<Interferogram<T>> {
    sweep.validate()?;
    if time_trace.len() < 2 {
        return Err(Error::Calibration("trace needs at least two samples".into()));
    }
    let t0 = time_trace[0].0;
    let duration = time_trace[time_trace.len() - 1].0 - t0;
    let expected = sweep.duration_s();
    if !((duration - expected).abs() <= T::lit(CALIBRATION_TOLERANCE) * expected) {
        return Err(Error::Calibration(format!("trace lasts {duration} s but the sweep takes {expected} s")));
    }
    let start = sweep.lambda_start.nm();
    let time_s: Vec<T> = time_trace.iter().map(|&(t, _)| t).collect();
    let lambda_nm = time_s.iter().map(|&t| start + sweep.speed_nm_per_s * (t - t0)).collect();
    let intensity = time_trace.iter().map(|&(_, i)| i).collect();
    let meta = TraceMeta { origin: "calibrated".into(), ..TraceMeta::default() };
    Interferogram::new(time_s, lambda_nm, intensity, meta).map_err(|e| Error::Calibration(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig<T> {
    /// Gaussian noise σ as a fraction of the trace maximum.
    pub additive_sigma: T,
    /// Detected electrons per unit intensity; 0 disables shot noise.
    pub shot_scale: T,
    /// Interferometer drift in rad/s, applied to the fringe argument.
    pub drift_rad_per_s: T,
    pub seed: u64,
}

impl<T: Scalar> NoiseConfig<T> {
    pub fn noiseless(seed: u64) -> Self {
        Self { additive_sigma: T::zero(), shot_scale: T::zero(), drift_rad_per_s: T::zero(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.additive_sigma >= T::zero()) || !self.additive_sigma.is_finite() {
            return Err(Error::Config(format!("additive_sigma must be non-negative, got {}", self.additive_sigma)));
        }
        if !(self.shot_scale >= T::zero()) || !self.shot_scale.is_finite() {
            return Err(Error::Config(format!("shot_scale must be non-negative, got {}", self.shot_scale)));
        }
        if !self.drift_rad_per_s.is_finite() {
            return Err(Error::Config("drift_rad_per_s must be finite".into()));
        }
        Ok(())
    }

    fn is_silent(&self) -> bool {
        self.additive_sigma == T::zero() && self.shot_scale == T::zero() && self.drift_rad_per_s == T::zero()
    }
}

/// Noisy copy of `clean` drawn from stream 0 of `cfg.seed`.
pub fn add_noise<T: Scalar>(clean: &Interferogram<T>, cfg: &NoiseConfig<T>) -> Result<Interferogram<T>> {
    add_noise_scan(clean, cfg, 0)
}

/// Noisy copy of `clean` for scan `scan_index` of a seeded series.
pub fn add_noise_scan<T: Scalar>(clean: &Interferogram<T>, cfg: &NoiseConfig<T>, scan_index: u64) -> Result<Interferogram<T>> {
    cfg.validate()?;
    let mut out = clean.clone();
    out.meta.seed = Some(cfg.seed);
    out.meta.scan_index = Some(scan_index);
    if cfg.is_silent() {
        return Ok(out);
    }
    if cfg.drift_rad_per_s != T::zero() {
        let parts = clean
            .components
            .as_ref()
            .ok_or_else(|| Error::Config("phase drift needs a synthesized trace with fringe components".into()))?;
        let t0 = clean.time_s[0];
        for (k, v) in out.intensity.iter_mut().enumerate() {
            let phi = parts.phase[k] + cfg.drift_rad_per_s * (clean.time_s[k] - t0);
            *v = parts.baseline[k] + parts.modulation[k] * phi.cos();
        }
    }
    let peak = clean.intensity.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let sigma = cfg.additive_sigma * peak;
    let mut rng = scan_rng(cfg.seed, scan_index);
    let shot = cfg.shot_scale > T::zero();
    for v in out.intensity.iter_mut() {
        let mut noisy = *v;
        if sigma > T::zero() {
            let z: f64 = StandardNormal.sample(&mut rng);
            noisy = noisy + sigma * T::lit(z);
        }
        if shot {
            let z: f64 = StandardNormal.sample(&mut rng);
            noisy = noisy + (v.max(T::zero()) / cfg.shot_scale).sqrt() * T::lit(z);
        }
        *v = noisy;
    }
    Ok(out)
}

fn format_value<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Writes `time_s,lambda_nm,intensity` rows with 17 significant digits.
pub fn write_trace_csv<T: Scalar, W: Write>(trace: &Interferogram<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(TRACE_HEADER).map_err(io)?;
    for k in 0..trace.len() {
        w.write_record([format_value(trace.time_s[k]), format_value(trace.lambda_nm[k]), format_value(trace.intensity[k])])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Trace(e.to_string()))
}

/// Parses a trace written by [`write_trace_csv`]. Errors name the file line.
pub fn read_trace_csv<T: Scalar, R: Read>(reader: R) -> Result<Interferogram<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Trace(format!("row 1: {e}")))?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::Trace(format!(
            "row 1: expected header `{}`, found `{}`",
            TRACE_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut time_s, mut lambda_nm, mut intensity) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Trace(format!("row {row}: {e}")))?;
        if record.len() != 3 {
            return Err(Error::Trace(format!("row {row}: expected 3 fields, found {}", record.len())));
        }
        let mut vals = [T::zero(); 3];
        for (slot, (field, name)) in vals.iter_mut().zip(record.iter().zip(TRACE_HEADER)) {
            let v: f64 =
                field.parse().map_err(|_| Error::Trace(format!("row {row}: `{field}` is not a number in column {name}")))?;
            *slot = T::lit(v);
        }
        time_s.push(vals[0]);
        lambda_nm.push(vals[1]);
        intensity.push(vals[2]);
    }
    let meta = TraceMeta { origin: "file".into(), ..TraceMeta::default() };
    Interferogram::new(time_s, lambda_nm, intensity, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::DispersionParameter;
    use crate::phase_matching::{ParametricProcess, ProcessKind};

    fn nm(x: f64) -> Wavelength<f64> {
        Wavelength::from_nm(x).unwrap()
    }

    fn config() -> SynthesisConfig<f64> {
        let fiber = FiberUnderTest { length: 10.0, beta0: 0.05, beta1: 4.9e-9, beta2: 0.0, beta3: 0.0, reference: nm(1560.6) }
            .with_dispersion(DispersionParameter(-82.08));
        let sfg = ParametricProcess::with_fwhm(ProcessKind::SfgArm1, nm(1540.0), 24.0, 0.03).unwrap();
        SynthesisConfig {
            fiber,
            pump: nm(780.3),
            envelope: EnvelopeModel {
                dfg: ParametricProcess::with_fwhm(ProcessKind::Dfg, nm(1540.0), 40.0, 0.02).unwrap(),
                sfg_arm1: sfg,
                sfg_arm2: ParametricProcess { kind: ProcessKind::SfgArm2, ..sfg },
            },
            sweep: SweepGrid::from_nm(1535.0, 1545.0, 10_000, 100.0).unwrap(),
            amplitude: 1.0,
            offset: 0.02,
            visibility: 1.0,
        }
    }

    #[test]
    fn no_dispersion_no_fringes() {
        let mut cfg = config();
        cfg.fiber.beta2 = 0.0;
        cfg.fiber.beta0 = 0.0;
        let t = synthesize(&cfg).unwrap();
        for (l, i) in t.wavelengths().zip(&t.intensity) {
            let expect = cfg.offset + cfg.amplitude * cfg.envelope.gain(l);
            assert!((i - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn bounds_and_extrema() {
        let cfg = config();
        let t = synthesize(&cfg).unwrap();
        assert!(t.meta.warnings.is_empty());
        let parts = t.components.as_ref().unwrap();
        for (k, (l, &i)) in t.wavelengths().zip(&t.intensity).enumerate() {
            let top = cfg.offset + cfg.amplitude * cfg.envelope.gain(l);
            assert!(i >= cfg.offset - 1e-15 && i <= top + 1e-15);
            let c = parts.phase[k].cos();
            if c > 1.0 - 1e-12 {
                assert!((i - top).abs() < 1e-9);
            }
            if c < -1.0 + 1e-12 {
                assert!((i - cfg.offset).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fringe_count_matches_endpoint_phases() {
        let cfg = config();
        let t = synthesize(&cfg).unwrap();
        let parts = t.components.unwrap();
        let count = (parts.phase[0] - parts.phase[parts.phase.len() - 1]) / std::f64::consts::TAU;
        // L·β2·(Δω²(1535) − Δω²(1545))/2π with the detunings evaluated independently
        assert!((count - 43.35467876060337).abs() < 1e-6, "{count}");
    }

    #[test]
    fn phase_consistent_with_dispersion_model() {
        let cfg = config();
        let t = synthesize(&cfg).unwrap();
        let parts = t.components.as_ref().unwrap();
        for (k, l) in t.wavelengths().enumerate().step_by(97) {
            let d = detuning_from_degeneracy(l, cfg.pump).unwrap();
            let want = quantum_like_phase(&cfg.fiber, d);
            assert!(crate::scalar::phase_distance(parts.phase[k], want).abs() <= 1e-9);
        }
    }

    #[test]
    fn warns_outside_sfg_lobes() {
        let mut cfg = config();
        cfg.sweep = SweepGrid::from_nm(1600.0, 1610.0, 100, 100.0).unwrap();
        let t = synthesize(&cfg).unwrap();
        assert_eq!(t.meta.warnings.len(), 1);
    }

    #[test]
    fn rejects_invalid_signal_levels() {
        let mut cfg = config();
        cfg.amplitude = 0.0;
        assert!(matches!(synthesize(&cfg), Err(Error::Config(_))));
        let mut cfg = config();
        cfg.offset = -1.0;
        assert!(matches!(synthesize(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn calibration() {
        let sweep = SweepGrid::from_nm(1535.0, 1545.0, 1001, 100.0).unwrap();
        let rec: Vec<(f64, f64)> = (0..1001).map(|k| (k as f64 * 1e-4, 1.0)).collect();
        let t = calibrate(&rec, &sweep).unwrap();
        assert_eq!(t.lambda_nm[0], 1535.0);
        assert!((t.lambda_nm[1000] - 1545.0).abs() < 1e-9);
        let long: Vec<(f64, f64)> = (0..1001).map(|k| (k as f64 * 1.05e-4, 1.0)).collect();
        assert!(matches!(calibrate(&long, &sweep), Err(Error::Calibration(_))));
        let slightly: Vec<(f64, f64)> = (0..1001).map(|k| (k as f64 * 1.005e-4, 1.0)).collect();
        assert!(calibrate(&slightly, &sweep).is_ok());
    }

    #[test]
    fn silent_noise_is_identity() {
        let clean = synthesize(&config()).unwrap();
        let same = add_noise(&clean, &NoiseConfig::noiseless(5)).unwrap();
        assert_eq!(same.intensity, clean.intensity);
    }

    #[test]
    fn noise_is_seeded() {
        let clean = synthesize(&config()).unwrap();
        let cfg = NoiseConfig { additive_sigma: 0.01, shot_scale: 1e4, drift_rad_per_s: 3.0, seed: 42 };
        let a = add_noise_scan(&clean, &cfg, 3).unwrap();
        let b = add_noise_scan(&clean, &cfg, 3).unwrap();
        assert!(a.intensity.iter().zip(&b.intensity).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = add_noise_scan(&clean, &cfg, 4).unwrap();
        assert_ne!(a.intensity, c.intensity);
    }

    #[test]
    fn additive_noise_level() {
        let clean = synthesize(&config()).unwrap();
        let cfg = NoiseConfig { additive_sigma: 0.01, shot_scale: 0.0, drift_rad_per_s: 0.0, seed: 9 };
        let noisy = add_noise(&clean, &cfg).unwrap();
        let peak = clean.intensity.iter().cloned().fold(0.0, f64::max);
        let d: Vec<f64> = noisy.intensity.iter().zip(&clean.intensity).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!((std / (0.01 * peak) - 1.0).abs() < 0.05, "std = {std}");
    }

    #[test]
    fn drift_shifts_the_fringe_argument() {
        let clean = synthesize(&config()).unwrap();
        let cfg = NoiseConfig { additive_sigma: 0.0, shot_scale: 0.0, drift_rad_per_s: 10.0, seed: 0 };
        let drifted = add_noise(&clean, &cfg).unwrap();
        let parts = clean.components.as_ref().unwrap();
        let k = 7000;
        let want = parts.baseline[k] + parts.modulation[k] * (parts.phase[k] + 10.0 * clean.time_s[k]).cos();
        assert!((drifted.intensity[k] - want).abs() < 1e-15);
        let file =
            Interferogram::new(clean.time_s.clone(), clean.lambda_nm.clone(), clean.intensity.clone(), TraceMeta::default())
                .unwrap();
        assert!(add_noise(&file, &cfg).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cfg = NoiseConfig { additive_sigma: 0.01, shot_scale: 0.0, drift_rad_per_s: 0.0, seed: 1 };
        let t = add_noise(&synthesize(&config()).unwrap(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,lambda_nm,intensity\n"));
        let back: Interferogram<f64> = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(back.intensity, t.intensity);
        assert_eq!(back.lambda_nm, t.lambda_nm);
        assert_eq!(back.time_s, t.time_s);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let text = "time_s,lambda_nm,intensity\n0.0,1535.0,0.5\n1e-5,1535.001,0.4\n2e-5,1535";
        let err = read_trace_csv::<f64, _>(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 4"), "{err}");
        let text = "time_s,lambda_nm,intensity\n0.0,1535.0,0.5\n1e-5,abc,0.4\n";
        let err = read_trace_csv::<f64, _>(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        let err = read_trace_csv::<f64, _>("t,l,i\n0,1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"));
    }
}
