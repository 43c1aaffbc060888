use num_complex::Complex;
use rustfft::FftPlanner;

use super::{FitModel, FringeSetup};
use crate::error::{Error, Result};
use crate::interferogram::Interferogram;
use crate::scalar::{wrap_phase, Scalar};
use crate::spectral::detuning_from_degeneracy;

/// Fewest fringes across the trace for a usable estimate.
const MIN_FRINGES: f64 = 4.0;
/// Smallest normalized fringe amplitude accepted as a pattern.
const MIN_FRINGE_AMPLITUDE: f64 = 0.1;
/// Shrinks the two-bin bracket by 0.618³⁰ ≈ 5e-7, far below what the fit needs.
const GOLDEN_ITERATIONS: usize = 30;

/// Strongest fringe tone in the `Δω²` coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak<T> {
    /// Angular frequency in rad per (rad/s)², i.e. an estimate of `|β₂L|`.
    pub frequency: T,
    /// Phase of the tone at `Δω² = 0`.
    pub phase: T,
    /// Tone amplitude relative to the normalized fringe signal.
    pub amplitude: T,
    /// Fringes spanned by the trace at this frequency.
    pub fringes: T,
}

fn quantile<T: Scalar>(values: &[T], q: f64) -> T {
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = T::lit(pos - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

fn hann<T: Scalar>(x: T) -> T {
    // x in [0, 1]
    let s = (T::PI() * x).sin();
    s * s
}

/// `Σ x_m e^{−iθm}` by complex rotation, with no per-sample trig.
fn grid_tone<T: Scalar>(x: &[T], theta: T) -> Complex<T> {
    let step = Complex::new(theta.cos(), -theta.sin());
    let mut z = Complex::new(T::one(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (m, &v) in x.iter().enumerate() {
        if m % 1024 == 0 {
            // resynchronize to keep rounding from accumulating
            let a = theta * T::from_usize_lossy(m);
            z = Complex::new(a.cos(), -a.sin());
        }
        acc = acc + z * v;
        z = z * step;
    }
    acc
}

/// Locates the fringe tone of a zero-mean signal `f(u)`.
///
/// The signal is resampled on a uniform `u` grid and Hann windowed; a
/// zero-padded FFT picks the bin, golden-section search on the windowed
/// sum refines it, and the phase comes from the refined component.
pub fn dominant_fringe_frequency<T: Scalar>(u: &[T], f: &[T]) -> Result<SpectralPeak<T>> {
    let n = u.len();
    if n < 8 || f.len() != n {
        return Err(Error::Estimation("too few samples for a spectral estimate".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| u[a].partial_cmp(&u[b]).expect("finite coordinate"));
    let us: Vec<T> = order.iter().map(|&k| u[k]).collect();
    let fs: Vec<T> = order.iter().map(|&k| f[k]).collect();
    let (u_min, u_max) = (us[0], us[n - 1]);
    let span = u_max - u_min;
    if !(span > T::zero()) {
        return Err(Error::Estimation("degenerate Δω² axis".into()));
    }

    // linear resampling onto a uniform grid
    let du = span / T::from_usize_lossy(n - 1);
    let mut grid = Vec::with_capacity(n);
    let mut j = 0;
    for m in 0..n {
        let x = u_min + du * T::from_usize_lossy(m);
        while j + 2 < n && us[j + 1] < x {
            j += 1;
        }
        let (x0, x1) = (us[j], us[j + 1]);
        let t = if x1 > x0 { ((x - x0) / (x1 - x0)).max(T::zero()).min(T::one()) } else { T::zero() };
        grid.push(fs[j] + (fs[j + 1] - fs[j]) * t);
    }
    let padded = (2 * n).next_power_of_two();
    let last = T::from_usize_lossy(n - 1);
    let windowed: Vec<T> = grid.iter().enumerate().map(|(m, &v)| v * hann(T::from_usize_lossy(m) / last)).collect();
    let mut buf: Vec<Complex<T>> = windowed.iter().map(|&v| Complex::new(v, T::zero())).collect();
    buf.resize(padded, Complex::new(T::zero(), T::zero()));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);

    let bin_omega = T::TAU() / (T::from_usize_lossy(padded) * du);
    let cycles_per_bin = T::from_usize_lossy(n - 1) / T::from_usize_lossy(padded);
    let first = ((T::lit(2.0) / cycles_per_bin).ceil().to_usize().unwrap_or(1)).max(1);
    let (peak_bin, _) = buf[..padded / 2].iter().enumerate().skip(first).fold((first, T::neg_infinity()), |best, (k, c)| {
        if c.norm_sqr() > best.1 {
            (k, c.norm_sqr())
        } else {
            best
        }
    });

    let weight_sum = (0..n).fold(T::zero(), |acc, m| acc + hann(T::from_usize_lossy(m) / last));
    let mag = |w: T| grid_tone(&windowed, w * du).norm();
    let mut lo = bin_omega * T::from_usize_lossy(peak_bin.saturating_sub(1).max(1));
    let mut hi = bin_omega * T::from_usize_lossy(peak_bin + 1);
    let golden = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (hi - golden * (hi - lo), lo + golden * (hi - lo));
    let (mut ma, mut mb) = (mag(a), mag(b));
    for _ in 0..GOLDEN_ITERATIONS {
        if ma > mb {
            hi = b;
            b = a;
            mb = ma;
            a = hi - golden * (hi - lo);
            ma = mag(a);
        } else {
            lo = a;
            a = b;
            ma = mb;
            b = lo + golden * (hi - lo);
            mb = mag(b);
        }
    }
    let frequency = (lo + hi) / T::lit(2.0);
    let tone = grid_tone(&windowed, frequency * du);
    let amplitude = T::lit(2.0) * tone.norm() / weight_sum;
    // the tone phase is referred to u_min; move it to u = 0
    let phase = wrap_phase(tone.arg() - frequency * u_min);
    let fringes = frequency * span / T::TAU();
    Ok(SpectralPeak { frequency, phase, amplitude, fringes })
}

/// Starting point for [`super::fit`], built from robust levels and the
/// dominant fringe tone. The returned `β₂L` is always positive.
pub fn initial_guess<T: Scalar>(trace: &Interferogram<T>, setup: &FringeSetup<T>) -> Result<FitModel<T>> {
    let n = trace.len();
    let mut u = Vec::with_capacity(n);
    let mut gain = Vec::with_capacity(n);
    for l in trace.wavelengths() {
        let dw = detuning_from_degeneracy(l, setup.pump)?.value();
        u.push(dw * dw);
        gain.push(setup.envelope.gain(l));
    }
    let g_floor = gain.iter().fold(T::zero(), |a, &g| a.max(g)) * T::lit(1e-3);
    if !(g_floor > T::zero()) {
        return Err(Error::Estimation("acceptance envelope vanishes across the trace".into()));
    }

    let offset = quantile(&trace.intensity, 0.02);
    let normalized: Vec<T> = trace.intensity.iter().zip(&gain).map(|(&y, &g)| (y - offset) / g.max(g_floor)).collect();
    let hi = quantile(&normalized, 0.98);
    let lo = quantile(&normalized, 0.02);
    let amplitude = hi + lo;
    if !(amplitude > T::zero()) || !(hi > lo) {
        return Err(Error::Estimation("no fringes detected: trace has no contrast".into()));
    }
    let visibility = ((hi - lo) / (hi + lo)).max(T::lit(0.05)).min(T::one());
    let fringe: Vec<T> = normalized.iter().map(|&v| T::lit(2.0) * v / amplitude - T::one()).collect();
    let mean = fringe.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(n);
    let centered: Vec<T> = fringe.iter().map(|&v| v - mean).collect();

    let peak = dominant_fringe_frequency(&u, &centered)?;
    if peak.amplitude < T::lit(MIN_FRINGE_AMPLITUDE) {
        return Err(Error::Estimation(format!(
            "no fringes detected (dominant tone amplitude {:.3e})",
            peak.amplitude.to_f64_lossy()
        )));
    }
    if peak.fringes < T::lit(MIN_FRINGES) {
        return Err(Error::Estimation(format!(
            "no fringes detected: only {:.2} fringes across the trace",
            peak.fringes.to_f64_lossy()
        )));
    }
    Ok(FitModel {
        amplitude,
        offset,
        visibility,
        beta2l: peak.frequency,
        phi0: peak.phase,
        pump: setup.pump,
        envelope: setup.envelope,
    })
}
