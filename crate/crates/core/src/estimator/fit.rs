use std::borrow::Cow;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::FitModel;
use crate::error::{Error, Result};
use crate::interferogram::Interferogram;
use crate::lsq::{self, LeastSquaresProblem, LmOptions, Termination};
use crate::phase_matching::{EnvelopeModel, ParametricProcess};
use crate::scalar::{wrap_phase, Scalar};
use crate::spectral::{detuning_from_degeneracy, Wavelength};

/// Fringe parameters in the order used by covariances.
pub const PARAMETER_NAMES: [&str; 5] = ["amplitude", "offset", "visibility", "beta2L", "phi0"];

/// Extra parameters when the envelope is released.
const ENVELOPE_NAMES: [&str; 4] = ["dfg_center_shift_nm", "dfg_log_width", "sfg_center_shift_nm", "sfg_log_width"];

/// Fringes spanned by the first window of the continuation schedule.
const FIRST_WINDOW_FRINGES: f64 = 2.0;
const MIN_WINDOW_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub max_iterations: usize,
    /// Relative rss change below which a fit counts as converged.
    pub tolerance: T,
    pub initial_damping: T,
    pub damping_increase: T,
    pub damping_decrease: T,
    /// Also fit the DFG and SFG centers and widths.
    pub free_envelope: bool,
    /// Restart from the mirrored `(−β₂L, −φ₀)` guess and keep the better fit.
    pub both_signs: bool,
    /// Grow the fitted window from a couple of fringes to the full trace.
    pub continuation: bool,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: T::lit(1e-10),
            initial_damping: T::lit(1e-3),
            damping_increase: T::lit(10.0),
            damping_decrease: T::lit(0.1),
            free_envelope: false,
            both_signs: true,
            continuation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub model: FitModel<T>,
    pub parameter_names: Vec<String>,
    /// Row-major covariance over `parameter_names`.
    pub covariance: Vec<T>,
    pub rss: T,
    /// Accepted-step count summed over the continuation stages.
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// rss of the final full-trace stage after each accepted step.
    pub rss_history: Vec<T>,
    pub n_samples: usize,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_params(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn std_error(&self, name: &str) -> Option<T> {
        let p = self.n_params();
        let i = self.parameter_names.iter().position(|n| n == name)?;
        self.covariance.get(i * p + i).map(|v| v.sqrt())
    }

    /// `√(rss/(n−p))`.
    pub fn residual_std(&self) -> T {
        let dof = self.n_samples.saturating_sub(self.n_params()).max(1);
        (self.rss / T::from_usize_lossy(dof)).sqrt()
    }
}

struct TraceData<T> {
    lambda: Vec<Wavelength<T>>,
    u: Vec<T>,
    y: Vec<T>,
    gain: Vec<T>,
    contrast: Vec<T>,
    y_scale: T,
}

impl<T: Scalar> TraceData<T> {
    fn new(trace: &Interferogram<T>, model: &FitModel<T>) -> Result<Self> {
        let lambda: Vec<Wavelength<T>> = trace.wavelengths().collect();
        let mut u = Vec::with_capacity(lambda.len());
        for &l in &lambda {
            let dw = detuning_from_degeneracy(l, model.pump)?.value();
            u.push(dw * dw);
        }
        let gain = lambda.iter().map(|&l| model.envelope.gain(l)).collect();
        let contrast = lambda.iter().map(|&l| model.envelope.arm_visibility(l)).collect();
        let y_scale = trace.intensity.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        Ok(Self { lambda, u, y: trace.intensity.clone(), gain, contrast, y_scale })
    }
}

/// Process with its center moved by `shift_nm` and its acceptance width scaled by `e^{log_width}`.
fn reshaped<T: Scalar>(p: &ParametricProcess<T>, shift_nm: T, log_width: T) -> ParametricProcess<T> {
    let center = Wavelength::from_nm(p.center.nm() + shift_nm).unwrap_or(p.center);
    ParametricProcess { center, mismatch_slope: p.mismatch_slope * (-log_width).exp(), ..*p }
}

fn reshaped_envelope<T: Scalar>(base: &EnvelopeModel<T>, q: &[T]) -> EnvelopeModel<T> {
    EnvelopeModel {
        dfg: reshaped(&base.dfg, q[0], q[1]),
        sfg_arm1: reshaped(&base.sfg_arm1, q[2], q[3]),
        sfg_arm2: reshaped(&base.sfg_arm2, q[2], q[3]),
    }
}

/// One window of the trace, in window-centered coordinates
/// `s = (u − center)/half_width` and phase `κ·s + ψ`.
///
/// Local parameter vector: `[A, B, V, κ, ψ]` followed by the four envelope
/// parameters when the envelope is free. Only the `free` entries are
/// exposed to the solver; the rest stay at `fixed`.
struct WindowProblem<'a, T> {
    data: &'a TraceData<T>,
    range: Range<usize>,
    center: T,
    half_width: T,
    free: Vec<usize>,
    fixed: Vec<T>,
    envelope: Option<EnvelopeModel<T>>,
}

impl<T: Scalar> WindowProblem<'_, T> {
    fn expand(&self, x: &[T]) -> Vec<T> {
        let mut q = self.fixed.clone();
        for (&i, &v) in self.free.iter().zip(x) {
            q[i] = v;
        }
        q
    }

    fn levels(&self, q: &[T]) -> (Cow<'_, [T]>, Cow<'_, [T]>) {
        match &self.envelope {
            Some(base) => {
                let env = reshaped_envelope(base, &q[5..]);
                let lam = &self.data.lambda[self.range.clone()];
                (
                    Cow::Owned(lam.iter().map(|&l| env.gain(l)).collect()),
                    Cow::Owned(lam.iter().map(|&l| env.arm_visibility(l)).collect()),
                )
            }
            None => (Cow::Borrowed(&self.data.gain[self.range.clone()]), Cow::Borrowed(&self.data.contrast[self.range.clone()])),
        }
    }

    fn eval(&self, q: &[T], out: &mut [T]) {
        let (gain, contrast) = self.levels(q);
        let half = T::lit(0.5);
        let (a, b, vis, kappa, psi) = (q[0], q[1], q[2], q[3], q[4]);
        for (j, k) in self.range.clone().enumerate() {
            let s = (self.data.u[k] - self.center) / self.half_width;
            let c = (kappa * s + psi).cos();
            out[j] = b + a * gain[j] * half * (T::one() + vis * contrast[j] * c) - self.data.y[k];
        }
    }
}

impl<T: Scalar> LeastSquaresProblem<T> for WindowProblem<'_, T> {
    fn parameter_names(&self) -> Vec<String> {
        self.free.iter().map(|&i| PARAMETER_NAMES.get(i).copied().unwrap_or_else(|| ENVELOPE_NAMES[i - 5]).to_string()).collect()
    }

    fn residual_count(&self) -> usize {
        self.range.len()
    }

    fn residuals(&self, x: &[T], out: &mut [T]) {
        self.eval(&self.expand(x), out);
    }

    fn jacobian(&self, x: &[T], out: &mut [T]) {
        let q = self.expand(x);
        let (gain, contrast) = self.levels(&q);
        let p = self.free.len();
        let half = T::lit(0.5);
        let (a, vis, kappa, psi) = (q[0], q[2], q[3], q[4]);
        for (j, k) in self.range.clone().enumerate() {
            let s = (self.data.u[k] - self.center) / self.half_width;
            let (sn, cs) = (kappa * s + psi).sin_cos();
            let g = gain[j] * half;
            let v = contrast[j];
            let full =
                [g * (T::one() + vis * v * cs), T::one(), a * g * v * cs, -a * g * vis * v * sn * s, -a * g * vis * v * sn];
            let row = &mut out[j * p..(j + 1) * p];
            for (slot, &i) in row.iter_mut().zip(&self.free) {
                if i < 5 {
                    *slot = full[i];
                }
            }
        }
        // envelope columns by central differences
        let m = self.range.len();
        let mut plus = vec![T::zero(); m];
        let mut minus = vec![T::zero(); m];
        for (col, &i) in self.free.iter().enumerate() {
            if i < 5 {
                continue;
            }
            let h = if i % 2 == 1 { T::lit(1e-3) } else { T::lit(1e-4) };
            let mut qp = q.clone();
            qp[i] = q[i] + h;
            let mut qm = q.clone();
            qm[i] = q[i] - h;
            self.eval(&qp, &mut plus);
            self.eval(&qm, &mut minus);
            for j in 0..m {
                out[j * p + col] = (plus[j] - minus[j]) / (h + h);
            }
        }
    }
}

/// Seeds `[A, B, ψ]` over one window at fixed κ and V.
///
/// Over a few fringes the envelope is nearly flat, so `B` and `A·g/2` are
/// almost collinear and a free fit can land on the mirrored `(−A, ψ + π)`
/// solution. Taking `A` from the modulation depth keeps it positive.
fn seed_phase<T: Scalar>(problem: &WindowProblem<'_, T>, local: &mut [T]) {
    let (gain, contrast) = problem.levels(local);
    let half = T::lit(0.5);
    let mut normal = [T::zero(); 9];
    let mut rhs = [T::zero(); 3];
    for (j, k) in problem.range.clone().enumerate() {
        let s = (problem.data.u[k] - problem.center) / problem.half_width;
        let (sn, cs) = (local[3] * s).sin_cos();
        let m = gain[j] * half * contrast[j];
        let row = [T::one(), m * cs, -m * sn];
        for a in 0..3 {
            rhs[a] = rhs[a] + row[a] * problem.data.y[k];
            for b in 0..3 {
                normal[a * 3 + b] = normal[a * 3 + b] + row[a] * row[b];
            }
        }
    }
    let Some(inv) = lsq::invert_spd(&normal, 3) else { return };
    let x: Vec<T> = (0..3).map(|a| (0..3).fold(T::zero(), |acc, b| acc + inv[a * 3 + b] * rhs[b])).collect();
    let depth = x[1].hypot(x[2]);
    if !x.iter().all(|v| v.is_finite()) || !(depth > T::zero()) || !(local[2] > T::zero()) {
        return;
    }
    let amplitude = depth / local[2];
    let mean_gain = gain.iter().fold(T::zero(), |a, &g| a + g) / T::from_usize_lossy(gain.len());
    local[0] = amplitude;
    local[1] = x[0] - amplitude * mean_gain * half;
    local[4] = x[2].atan2(x[1]);
}

fn window_rss<T: Scalar>(problem: &WindowProblem<'_, T>, q: &[T]) -> T {
    let mut r = vec![T::zero(); problem.range.len()];
    problem.eval(q, &mut r);
    let rss = r.iter().fold(T::zero(), |a, &v| a + v * v);
    if rss.is_finite() {
        rss
    } else {
        T::infinity()
    }
}

struct Outcome<T> {
    global: Vec<T>,
    covariance: Vec<T>,
    names: Vec<String>,
    rss: T,
    iterations: usize,
    termination: Termination,
    history: Vec<T>,
}

fn window_schedule(n: usize, fringes: f64, continuation: bool) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    if continuation && fringes > 2.0 * FIRST_WINDOW_FRINGES {
        let mid = n / 2;
        let mut width = ((n as f64 * FIRST_WINDOW_FRINGES / fringes).ceil() as usize).max(MIN_WINDOW_SAMPLES);
        while width < n {
            let lo = mid.saturating_sub(width / 2);
            let hi = (lo + width).min(n);
            out.push(lo..hi);
            width *= 2;
        }
    }
    out.push(0..n);
    out
}

fn fit_from<T: Scalar>(data: &TraceData<T>, start: &FitModel<T>, options: &FitOptions<T>) -> Result<Outcome<T>> {
    let n = data.u.len();
    let n_env = if options.free_envelope { 4 } else { 0 };
    // global parameters: [A, B, V, β₂L, φ₀, envelope...]
    let mut global = vec![start.amplitude, start.offset, start.visibility, start.beta2l, start.phi0];
    global.extend(std::iter::repeat_n(T::zero(), n_env));

    let u_min = data.u.iter().fold(T::infinity(), |a, &v| a.min(v));
    let u_max = data.u.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let fringes = (start.beta2l * (u_max - u_min) / T::TAU()).abs().to_f64_lossy();
    let schedule = window_schedule(n, fringes, options.continuation);

    let mut iterations = 0;
    let last = schedule.len() - 1;
    let mut final_stage = None;
    for (stage, range) in schedule.into_iter().enumerate() {
        let is_final = stage == last;
        let window = &data.u[range.clone()];
        let lo = window.iter().fold(T::infinity(), |a, &v| a.min(v));
        let hi = window.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let center = (lo + hi) / T::lit(2.0);
        let half_width = ((hi - lo) / T::lit(2.0)).max(T::min_positive_value());

        let mut local = global.clone();
        local[3] = global[3] * half_width;
        local[4] = global[4] + global[3] * center;
        let free: Vec<usize> = if is_final { (0..5 + n_env).collect() } else { vec![0, 1, 3, 4] };
        let mut problem = WindowProblem {
            data,
            range: range.clone(),
            center,
            half_width,
            free,
            fixed: local.clone(),
            envelope: (is_final && options.free_envelope).then_some(start.envelope),
        };
        if stage == 0 {
            let mut seeded = local.clone();
            seed_phase(&problem, &mut seeded);
            if window_rss(&problem, &seeded) < window_rss(&problem, &local) {
                local = seeded;
                problem.fixed = local.clone();
            }
        }
        let x0: Vec<T> = problem.free.iter().map(|&i| local[i]).collect();
        let floor = T::from_usize_lossy(range.len()) * (T::lit(1e-12) * data.y_scale).powi(2);
        let lm = LmOptions {
            max_iterations: options.max_iterations,
            tolerance: options.tolerance,
            initial_damping: options.initial_damping,
            damping_increase: options.damping_increase,
            damping_decrease: options.damping_decrease,
            rss_floor: floor,
            check_rank: is_final,
        };
        let report = lsq::minimize(&problem, &x0, &lm)?;
        iterations += report.iterations;
        let solved = problem.expand(&report.params);
        global = solved.clone();
        global[3] = solved[3] / half_width;
        global[4] = solved[4] - global[3] * center;
        if is_final {
            final_stage = Some((report, problem.parameter_names(), center, half_width));
        } else if !report.params.iter().all(|v| v.is_finite()) {
            break;
        }
    }

    let (report, names, center, half_width) =
        final_stage.ok_or_else(|| Error::NotConverged("continuation stage produced non-finite parameters".into()))?;
    let p = names.len();
    let covariance = match report.covariance() {
        Some(local) => {
            // d(global)/d(local): β₂L = κ/h, φ₀ = ψ − κ·c/h
            let mut jac = vec![T::zero(); p * p];
            for i in 0..p {
                jac[i * p + i] = T::one();
            }
            jac[3 * p + 3] = T::one() / half_width;
            jac[4 * p + 3] = -center / half_width;
            let mut tmp = vec![T::zero(); p * p];
            for i in 0..p {
                for j in 0..p {
                    tmp[i * p + j] = (0..p).fold(T::zero(), |acc, k| acc + jac[i * p + k] * local[k * p + j]);
                }
            }
            let mut cov = vec![T::zero(); p * p];
            for i in 0..p {
                for j in 0..p {
                    cov[i * p + j] = (0..p).fold(T::zero(), |acc, k| acc + tmp[i * p + k] * jac[j * p + k]);
                }
            }
            cov
        }
        None => vec![T::nan(); p * p],
    };
    Ok(Outcome {
        global,
        covariance,
        names,
        rss: report.rss,
        iterations,
        termination: report.termination,
        history: report.rss_history,
    })
}

/// Least-squares fit of the fringe model to `trace`, starting from `guess`.
///
/// Fringe parameters are always free; the envelope only when
/// `options.free_envelope` is set. A rank-deficient problem is an error
/// naming the offending parameter; every other failure is reported through
/// `converged = false`.
pub fn fit<T: Scalar>(trace: &Interferogram<T>, guess: &FitModel<T>, options: &FitOptions<T>) -> Result<FitResult<T>> {
    for (name, v) in [
        ("amplitude", guess.amplitude),
        ("offset", guess.offset),
        ("visibility", guess.visibility),
        ("beta2L", guess.beta2l),
        ("phi0", guess.phi0),
    ] {
        if !v.is_finite() {
            return Err(Error::Config(format!("initial {name} is not finite")));
        }
    }
    let data = TraceData::new(trace, guess)?;
    let primary = fit_from(&data, guess, options);
    let chosen = if options.both_signs {
        let mirrored = fit_from(&data, &guess.with_sign_flipped(), options);
        match (primary, mirrored) {
            (Ok(a), Ok(b)) => {
                let a_ok = a.termination.is_converged();
                let b_ok = b.termination.is_converged();
                let tie =
                    T::lit(1e-6) * a.rss.max(b.rss) + T::from_usize_lossy(data.u.len()) * (T::lit(1e-12) * data.y_scale).powi(2);
                let b_better = (b_ok && !a_ok) || (b_ok == a_ok && b.rss < a.rss - tie);
                if b_better {
                    b
                } else {
                    a
                }
            }
            (Ok(a), Err(_)) => a,
            (Err(_), Ok(b)) => b,
            (Err(e), Err(_)) => return Err(e),
        }
    } else {
        primary?
    };

    let g = &chosen.global;
    let envelope = if options.free_envelope { reshaped_envelope(&guess.envelope, &g[5..9]) } else { guess.envelope };
    let model = FitModel {
        amplitude: g[0],
        offset: g[1],
        visibility: g[2],
        beta2l: g[3],
        phi0: wrap_phase(g[4]),
        pump: guess.pump,
        envelope,
    };
    Ok(FitResult {
        model,
        parameter_names: chosen.names,
        covariance: chosen.covariance,
        rss: chosen.rss,
        iterations: chosen.iterations,
        converged: chosen.termination.is_converged(),
        termination: chosen.termination,
        rss_history: chosen.history,
        n_samples: data.u.len(),
    })
}
