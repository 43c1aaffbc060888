use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_cd, fit, initial_guess, FitOptions, FringeSetup};
use crate::dispersion::{beta2_from_d, DispersionParameter, FiberUnderTest};
use crate::error::{Error, Result};
use crate::interferogram::{add_noise_scan, synthesize, Interferogram, NoiseConfig, SynthesisConfig};
use crate::phase_matching::{EnvelopeModel, ParametricProcess, ProcessKind};
use crate::scalar::Scalar;
use crate::spectral::{SweepGrid, Wavelength};

/// Fraction of failed scans above which a summary is flagged invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Everything needed to synthesize, perturb and fit one scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub synthesis: SynthesisConfig<T>,
    pub noise: NoiseConfig<T>,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Scenario<T> {
    /// 10 m of fiber at −82.08 ps/(nm·km), swept over 1535–1545 nm in
    /// 10⁴ samples, 1% additive noise.
    pub fn reference() -> Self {
        let nm = |v: f64| Wavelength::from_nm(T::lit(v)).expect("positive literal");
        let reference = nm(1560.6);
        let beta2 = beta2_from_d(DispersionParameter(T::lit(-82.08)), reference);
        let fiber = FiberUnderTest {
            length: T::lit(10.0),
            beta0: T::lit(0.05),
            beta1: T::lit(4.9e-9),
            beta2,
            beta3: T::zero(),
            reference,
        };
        let process = |kind, center, fwhm, length| {
            ParametricProcess::with_fwhm(kind, nm(center), T::lit(fwhm), T::lit(length)).expect("valid reference process")
        };
        let envelope = EnvelopeModel {
            dfg: process(ProcessKind::Dfg, 1540.0, 40.0, 0.02),
            sfg_arm1: process(ProcessKind::SfgArm1, 1540.0, 24.0, 0.03),
            sfg_arm2: process(ProcessKind::SfgArm2, 1540.0, 24.0, 0.03),
        };
        let sweep = SweepGrid::from_nm(T::lit(1535.0), T::lit(1545.0), 10_000, T::lit(100.0)).expect("valid reference sweep");
        Self {
            synthesis: SynthesisConfig {
                fiber,
                pump: nm(780.3),
                envelope,
                sweep,
                amplitude: T::one(),
                offset: T::lit(0.02),
                visibility: T::one(),
            },
            noise: NoiseConfig { additive_sigma: T::lit(0.01), shot_scale: T::zero(), drift_rad_per_s: T::zero(), seed: 1 },
            fit: FitOptions::default(),
        }
    }

    pub fn setup(&self) -> FringeSetup<T> {
        FringeSetup { pump: self.synthesis.pump, envelope: self.synthesis.envelope }
    }

    /// Configured dispersion in ps/(nm·km).
    pub fn truth(&self) -> T {
        self.synthesis.fiber.dispersion().ps_per_nm_km()
    }

    /// Synthesizes, perturbs and fits scan `scan_index`, returning D in ps/(nm·km).
    pub fn run_scan(&self, clean: &Interferogram<T>, master_seed: u64, scan_index: u64) -> Result<T> {
        let noise = NoiseConfig { seed: master_seed, ..self.noise };
        let trace = add_noise_scan(clean, &noise, scan_index)?;
        let guess = initial_guess(&trace, &self.setup())?;
        let result = fit(&trace, &guess, &self.fit)?;
        let fiber = &self.synthesis.fiber;
        Ok(extract_cd(&result, fiber.length, fiber.reference)?.dispersion.ps_per_nm_km())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<T>,
    pub counts: Vec<usize>,
}

impl<T: Scalar> Histogram<T> {
    pub fn bin_width(&self, i: usize) -> T {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn quartiles<T: Scalar>(sorted: &[T]) -> (T, T) {
    let at = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        let t = T::lit(pos - lo as f64);
        sorted[lo] + (sorted[hi] - sorted[lo]) * t
    };
    (at(0.25), at(0.75))
}

/// Histogram with Freedman–Diaconis bin width `2·IQR·n^{-1/3}`.
///
/// Degenerate samples (zero spread) land in a single bin centered on the value.
pub fn histogram_freedman_diaconis<T: Scalar>(values: &[T]) -> Result<Histogram<T>> {
    if values.is_empty() {
        return Err(Error::Domain("cannot histogram an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram sample contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let (q1, q3) = quartiles(&sorted);
    let width = T::lit(2.0) * (q3 - q1) * T::from_usize_lossy(values.len()).powf(T::lit(-1.0 / 3.0));
    let n_bins = if hi > lo && width > T::zero() {
        ((hi - lo) / width).ceil().to_f64_lossy().clamp(1.0, values.len() as f64) as usize
    } else {
        1
    };
    if n_bins == 1 && !(hi > lo) {
        let pad = if lo == T::zero() { T::lit(0.5) } else { lo.abs() * T::lit(1e-9) };
        return Ok(Histogram { edges: vec![lo - pad, hi + pad], counts: vec![values.len()] });
    }
    let step = (hi - lo) / T::from_usize_lossy(n_bins);
    let mut edges: Vec<T> = (0..=n_bins).map(|i| lo + step * T::from_usize_lossy(i)).collect();
    edges[n_bins] = hi;
    let mut counts = vec![0; n_bins];
    for &v in &sorted {
        let k = ((v - lo) / step).floor().to_f64_lossy() as usize;
        counts[k.min(n_bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Empirical density per bin next to the normal density with the sample mean and std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianOverlay<T> {
    pub bin_centers: Vec<T>,
    pub density: Vec<T>,
    pub gaussian_density: Vec<T>,
}

impl<T: Scalar> GaussianOverlay<T> {
    pub fn new(histogram: &Histogram<T>, mean: T, std: T) -> Self {
        let total = T::from_usize_lossy(histogram.total().max(1));
        let mut out = Self { bin_centers: Vec::new(), density: Vec::new(), gaussian_density: Vec::new() };
        for (i, &count) in histogram.counts.iter().enumerate() {
            let center = (histogram.edges[i] + histogram.edges[i + 1]) / T::lit(2.0);
            out.bin_centers.push(center);
            out.density.push(T::from_usize_lossy(count) / (total * histogram.bin_width(i)));
            let g = if std > T::zero() {
                let z = (center - mean) / std;
                (-(z * z) / T::lit(2.0)).exp() / (std * T::TAU().sqrt())
            } else {
                T::zero()
            };
            out.gaussian_density.push(g);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub scan_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary<T> {
    pub n_requested: usize,
    /// Successful scans; equals `cd_values.len()`.
    pub n_scans: usize,
    pub master_seed: u64,
    /// Configured D in ps/(nm·km).
    pub truth: T,
    /// Extracted D in ps/(nm·km), ordered by scan index.
    pub cd_values: Vec<T>,
    pub scan_indices: Vec<u64>,
    pub mean: T,
    /// Sample standard deviation (n − 1 denominator).
    pub std: T,
    /// `std/√n`.
    pub standard_error: T,
    /// `100·std/√n/|mean|`.
    pub rel_error_percent: T,
    /// `100·std/|mean|`.
    pub rel_std_percent: T,
    pub histogram: Histogram<T>,
    pub overlay: GaussianOverlay<T>,
    pub failures: Vec<ScanFailure>,
    /// False when more than 5% of the scans failed.
    pub valid: bool,
}

impl<T: Scalar> McSummary<T> {
    pub fn convergence_fraction(&self) -> f64 {
        self.n_scans as f64 / self.n_requested.max(1) as f64
    }
}

/// Runs `n_scans` independent noisy scans of `scenario` and summarizes the extracted D.
///
/// Scan `k` draws its noise from stream `k` of `master_seed`, so the result
/// does not depend on the thread count.
pub fn monte_carlo<T: Scalar>(scenario: &Scenario<T>, n_scans: usize, master_seed: u64) -> Result<McSummary<T>> {
    if n_scans < 2 {
        return Err(Error::Config(format!("monte carlo needs at least 2 scans, got {n_scans}")));
    }
    scenario.noise.validate()?;
    let clean = synthesize(&scenario.synthesis)?;
    let outcomes: Vec<(u64, Result<T>)> =
        (0..n_scans as u64).into_par_iter().map(|k| (k, scenario.run_scan(&clean, master_seed, k))).collect();

    let mut cd_values = Vec::with_capacity(n_scans);
    let mut scan_indices = Vec::with_capacity(n_scans);
    let mut failures = Vec::new();
    for (k, outcome) in outcomes {
        match outcome {
            Ok(d) if d.is_finite() => {
                cd_values.push(d);
                scan_indices.push(k);
            }
            Ok(d) => failures.push(ScanFailure { scan_index: k, reason: format!("non-finite dispersion {d}") }),
            Err(e) => failures.push(ScanFailure { scan_index: k, reason: e.to_string() }),
        }
    }
    let n = cd_values.len();
    if n < 2 {
        return Err(Error::NotConverged(format!("only {n} of {n_scans} scans produced a dispersion value")));
    }
    let nf = T::from_usize_lossy(n);
    // shifted by the first value so identical samples give exactly zero spread
    let pivot = cd_values[0];
    let (sum, sum_sq) =
        cd_values.iter().fold((T::zero(), T::zero()), |(s, q), &v| (s + (v - pivot), q + (v - pivot) * (v - pivot)));
    let mean = pivot + sum / nf;
    let std = ((sum_sq - sum * sum / nf) / (nf - T::one())).max(T::zero()).sqrt();
    let standard_error = std / nf.sqrt();
    let histogram = histogram_freedman_diaconis(&cd_values)?;
    let overlay = GaussianOverlay::new(&histogram, mean, std);
    let valid = failures.len() as f64 <= MAX_FAILURE_FRACTION * n_scans as f64;
    Ok(McSummary {
        n_requested: n_scans,
        n_scans: n,
        master_seed,
        truth: scenario.truth(),
        cd_values,
        scan_indices,
        mean,
        std,
        standard_error,
        rel_error_percent: T::lit(100.0) * standard_error / mean.abs(),
        rel_std_percent: T::lit(100.0) * std / mean.abs(),
        histogram,
        overlay,
        failures,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let h = histogram_freedman_diaconis(&v).unwrap();
        assert_eq!(h.total(), 1000);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert!(h.edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_sample_single_bin() {
        let h = histogram_freedman_diaconis(&[-82.08_f64; 10]).unwrap();
        assert_eq!(h.counts, vec![10]);
        assert!(h.edges[0] < -82.08 && h.edges[1] > -82.08);
    }

    #[test]
    fn overlay_density_integrates_to_one() {
        let v: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).fract()).collect();
        let h = histogram_freedman_diaconis(&v).unwrap();
        let o = GaussianOverlay::new(&h, 0.5, 0.3);
        let area: f64 = o.density.iter().enumerate().map(|(i, d)| d * h.bin_width(i)).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_scans() {
        let s = Scenario::<f64>::reference();
        assert!(matches!(monte_carlo(&s, 1, 0), Err(Error::Config(_))));
    }
}
