//! Damped Gauss-Newton (Levenberg-Marquardt) least-squares engine.
//!
//! Problems are small and dense (a handful of parameters, up to ~10⁵
//! residuals), so the normal equations are formed explicitly and solved by
//! Cholesky with Marquardt's diagonal scaling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A residual vector `r(x)` and its Jacobian.
pub trait LeastSquaresProblem<T: Scalar> {
    /// One name per free parameter, in parameter order.
    fn parameter_names(&self) -> Vec<String>;

    fn residual_count(&self) -> usize;

    /// Writes `model(x) − data` into `out`.
    fn residuals(&self, params: &[T], out: &mut [T]);

    /// Writes the row-major `residual_count × n_params` Jacobian into `out`.
    fn jacobian(&self, params: &[T], out: &mut [T]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions<T> {
    pub max_iterations: usize,
    /// Converged once an accepted step lowers rss by less than this fraction.
    pub tolerance: T,
    pub initial_damping: T,
    pub damping_increase: T,
    pub damping_decrease: T,
    /// Absolute rss at or below which the fit counts as exact.
    pub rss_floor: T,
    /// Fail with [`Error::Singular`] if the final normal matrix is rank deficient.
    pub check_rank: bool,
}

impl<T: Scalar> Default for LmOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: T::lit(1e-10),
            initial_damping: T::lit(1e-3),
            damping_increase: T::lit(10.0),
            damping_decrease: T::lit(0.1),
            rss_floor: T::zero(),
            check_rank: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RelativeReduction,
    ResidualFloor,
    /// No damped step lowers rss any further.
    Stalled,
    MaxIterations,
    NonFinite,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::RelativeReduction | Self::ResidualFloor | Self::Stalled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport<T> {
    pub params: Vec<T>,
    pub rss: T,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// rss after the initial evaluation and after every accepted step.
    pub rss_history: Vec<T>,
    /// `JᵀJ` at the returned parameters, row-major.
    pub normal_matrix: Vec<T>,
    pub residual_count: usize,
}

impl<T: Scalar> LmReport<T> {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `rss/(n−p) · (JᵀJ)⁻¹`.
    pub fn covariance(&self) -> Option<Vec<T>> {
        let p = self.n_params();
        if self.residual_count <= p {
            return None;
        }
        let inv = invert_spd(&self.normal_matrix, p)?;
        let s2 = self.rss / T::from_usize_lossy(self.residual_count - p);
        Some(inv.into_iter().map(|v| v * s2).collect())
    }
}

fn sum_squares<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

fn normal_equations<T: Scalar>(jac: &[T], res: &[T], p: usize) -> (Vec<T>, Vec<T>) {
    let mut a = vec![T::zero(); p * p];
    let mut g = vec![T::zero(); p];
    for (row, &r) in jac.chunks_exact(p).zip(res) {
        for i in 0..p {
            let ji = row[i];
            g[i] = g[i] + ji * r;
            for j in 0..=i {
                a[i * p + j] = a[i * p + j] + ji * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[j * p + i] = a[i * p + j];
        }
    }
    (a, g)
}

/// In-place lower Cholesky factor. Returns the index of the first pivot
/// that is not positive when the matrix is not positive definite.
fn cholesky<T: Scalar>(a: &mut [T], p: usize) -> std::result::Result<(), usize> {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d = d - a[j * p + k] * a[j * p + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s = s - a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
        for i in 0..j {
            a[i * p + j] = T::zero();
        }
    }
    Ok(())
}

fn cholesky_solve<T: Scalar>(l: &[T], p: usize, b: &mut [T]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in (i + 1)..p {
            s = s - l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Inverse of a symmetric positive-definite matrix.
pub fn invert_spd<T: Scalar>(a: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = a.to_vec();
    cholesky(&mut l, p).ok()?;
    let mut inv = vec![T::zero(); p * p];
    let mut col = vec![T::zero(); p];
    for j in 0..p {
        col.iter_mut().for_each(|c| *c = T::zero());
        col[j] = T::one();
        cholesky_solve(&l, p, &mut col);
        for i in 0..p {
            inv[i * p + j] = col[i];
        }
    }
    Some(inv)
}

/// Index of the first parameter whose column is (numerically) a linear
/// combination of the preceding ones, judged on the unit-diagonal rescaling.
pub fn degenerate_parameter<T: Scalar>(normal: &[T], p: usize) -> Option<usize> {
    let diag: Vec<T> = (0..p).map(|i| normal[i * p + i]).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Some(i);
    }
    let mut c: Vec<T> = (0..p * p).map(|k| normal[k] / (diag[k / p] * diag[k % p]).sqrt()).collect();
    let pivot_floor = T::lit(1e-10);
    for j in 0..p {
        let mut d = c[j * p + j];
        for k in 0..j {
            d = d - c[j * p + k] * c[j * p + k];
        }
        if !(d > pivot_floor) {
            return Some(j);
        }
        let d = d.sqrt();
        c[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = c[i * p + j];
            for k in 0..j {
                s = s - c[i * p + k] * c[j * p + k];
            }
            c[i * p + j] = s / d;
        }
    }
    None
}

/// Minimizes `‖r(x)‖²` from `initial`.
///
/// Accepted steps never increase rss. Divergence or exhaustion of the
/// iteration budget yields a non-converged report; the only error is a
/// rank-deficient normal matrix when `check_rank` is set.
pub fn minimize<T: Scalar, P: LeastSquaresProblem<T> + ?Sized>(
    problem: &P,
    initial: &[T],
    options: &LmOptions<T>,
) -> Result<LmReport<T>> {
    let p = initial.len();
    let m = problem.residual_count();
    let mut x = initial.to_vec();
    let mut res = vec![T::zero(); m];
    let mut jac = vec![T::zero(); m * p];
    let mut trial = vec![T::zero(); p];
    let mut trial_res = vec![T::zero(); m];

    problem.residuals(&x, &mut res);
    let mut rss = sum_squares(&res);
    let mut history = vec![rss];
    let mut lambda = options.initial_damping;
    let mut iterations = 0;
    let lambda_ceiling = T::lit(1e16);

    let termination = 'outer: {
        if !rss.is_finite() {
            break 'outer Termination::NonFinite;
        }
        if rss <= options.rss_floor {
            break 'outer Termination::ResidualFloor;
        }
        while iterations < options.max_iterations {
            iterations += 1;
            problem.jacobian(&x, &mut jac);
            let (a, g) = normal_equations(&jac, &res, p);
            let max_diag = (0..p).fold(T::zero(), |acc, i| acc.max(a[i * p + i]));
            let diag_floor = max_diag * T::lit(1e-16) + T::min_positive_value();
            loop {
                let mut damped = a.clone();
                for i in 0..p {
                    damped[i * p + i] = a[i * p + i] + lambda * a[i * p + i].max(diag_floor);
                }
                let solved = cholesky(&mut damped, p).is_ok();
                if solved {
                    let mut step: Vec<T> = g.iter().map(|&v| -v).collect();
                    cholesky_solve(&damped, p, &mut step);
                    for i in 0..p {
                        trial[i] = x[i] + step[i];
                    }
                    problem.residuals(&trial, &mut trial_res);
                    let new_rss = sum_squares(&trial_res);
                    if new_rss.is_finite() && new_rss <= rss {
                        let reduction = (rss - new_rss) / rss;
                        std::mem::swap(&mut x, &mut trial);
                        std::mem::swap(&mut res, &mut trial_res);
                        rss = new_rss;
                        history.push(rss);
                        lambda = (lambda * options.damping_decrease).max(T::lit(1e-15));
                        if rss <= options.rss_floor {
                            break 'outer Termination::ResidualFloor;
                        }
                        if reduction < options.tolerance {
                            break 'outer Termination::RelativeReduction;
                        }
                        break;
                    }
                }
                lambda = lambda * options.damping_increase;
                if lambda > lambda_ceiling {
                    break 'outer Termination::Stalled;
                }
            }
        }
        Termination::MaxIterations
    };

    problem.jacobian(&x, &mut jac);
    let (normal, _) = normal_equations(&jac, &res, p);
    if options.check_rank && termination != Termination::NonFinite {
        if let Some(k) = degenerate_parameter(&normal, p) {
            let names = problem.parameter_names();
            return Err(Error::Singular { parameter: names.get(k).cloned().unwrap_or_else(|| format!("#{k}")) });
        }
    }
    Ok(LmReport {
        params: x,
        rss,
        iterations,
        converged: termination.is_converged(),
        termination,
        rss_history: history,
        normal_matrix: normal,
        residual_count: m,
    })
}
