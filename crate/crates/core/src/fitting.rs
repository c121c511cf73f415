//! Nonlinear least-squares fitting for dose-response and rate-constant
//! extraction.
//!
//! The engine is a damped Gauss-Newton (Levenberg-Marquardt) iteration on
//! residuals `r(p)`: solve `(JᵀJ + λ·diag(JᵀJ))·δ = −Jᵀr`, take `p + δ`
//! when it lowers the cost `Σrᵢ²` (then relax `λ`), otherwise stiffen `λ`
//! and retry. Jacobians come from central finite differences, so models
//! only need to evaluate residuals. The problems here are tiny (two or
//! three parameters, a few thousand residuals), which is why a dependency-
//! free implementation with Gaussian elimination on the normal equations
//! is the right size; it also keeps every arithmetic step deterministic.
//!
//! Failure to converge is an answer, not a panic: the engine returns its
//! best iterate with `converged = false` and callers decide how loudly to
//! complain. Hard errors are reserved for structurally broken inputs
//! (empty data, non-finite residuals at the starting point, more
//! parameters than points).
//!
//! Two domain fitters sit on top:
//!
//! * [`fit_isotherm`]: equilibrium steps vs concentration against the
//!   binding isotherm `ΔI = ΔI_sat·c/(c + K_D)`, seeded by half-saturation
//!   interpolation.
//! * [`fit_kinetics`]: a full association/dissociation trace against the
//!   two-phase exponential transient, seeded by log-linear regression on
//!   the dissociation tail and the half-rise time.

use serde::Serialize;
use thiserror::Error;

use crate::kinetics::SensingPoint;

/// Iteration cap the domain fitters default to; generous for two or three
/// parameters.
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// Engine stopping and damping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Outer iteration cap.
    pub max_iterations: usize,
    /// Relative step size below which the iterate is declared stationary.
    pub xtol: f64,
    /// Gradient infinity-norm below which the iterate is declared optimal.
    pub gtol: f64,
    /// Initial damping factor λ.
    pub lambda_init: f64,
    /// Damping ceiling; exceeding it ends the fit unconverged.
    pub lambda_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            xtol: 1e-10,
            gtol: 1e-12,
            lambda_init: 1e-3,
            lambda_max: 1e12,
        }
    }
}

/// Invalid fitting input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no data points to fit")]
    EmptyData,
    #[error("data vectors differ in length: {expected} vs {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{m} residuals cannot determine {n} parameters")]
    UnderDetermined { m: usize, n: usize },
    #[error("bounds must satisfy lo < hi for every parameter, got [{lo}, {hi}]")]
    BadBounds { lo: f64, hi: f64 },
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Best parameter vector found.
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    /// Outer iterations consumed.
    pub iterations: usize,
    /// Whether a stopping criterion fired before the caps.
    pub converged: bool,
    /// Asymptotic one-sigma parameter uncertainties
    /// `sqrt(cost/(m−n)·[(JᵀJ)⁻¹]ⱼⱼ)`; NaN entries when `m == n` or the
    /// normal matrix is singular.
    pub stderr: Vec<f64>,
}

/// Project a parameter vector onto the closed box. Iterates may sit exactly
/// on a bound; the finite-difference probes degrade to one-sided there.
fn clip_to_bounds(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
}

/// Solve `A·x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when the pivot collapses (singular system).
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn cost_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

fn finite_residuals(residuals: &[f64]) -> Result<(), FitError> {
    if let Some(index) = residuals.iter().position(|r| !r.is_finite()) {
        return Err(FitError::NonFinite {
            what: "residual",
            index,
        });
    }
    Ok(())
}

/// Central-difference Jacobian, columns indexed by parameter. Probe points
/// are clipped back inside the bounds and the actual probe separation is
/// used as the denominator, so boundary parameters degrade to one-sided
/// differences instead of stepping outside.
fn jacobian<F>(
    f: &F,
    p: &[f64],
    bounds: &[(f64, f64)],
) -> Result<Option<Vec<Vec<f64>>>, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = p.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let h = (1e-6 * p[j].abs()).max(1e-8);
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[j] = (p[j] + h).min(bounds[j].1);
        lo[j] = (p[j] - h).max(bounds[j].0);
        let denom = hi[j] - lo[j];
        if denom <= 0.0 {
            return Ok(None);
        }
        let r_hi = match f(&hi) {
            Ok(r) => r,
            Err(_) => return Ok(None),
        };
        let r_lo = match f(&lo) {
            Ok(r) => r,
            Err(_) => return Ok(None),
        };
        columns.push(
            r_hi.iter()
                .zip(&r_lo)
                .map(|(a, b)| (a - b) / denom)
                .collect(),
        );
    }
    Ok(Some(columns))
}

/// Minimize `Σ f(p)ᵢ²` from `initial`, constrained to `bounds` (one
/// `(lo, hi)` pair per parameter). `f` maps a parameter vector to the
/// residual vector; residual length must stay fixed across calls.
pub fn fit_least_squares<F>(
    f: F,
    initial: &[f64],
    bounds: &[(f64, f64)],
    options: &FitOptions,
) -> Result<FitResult, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = initial.len();
    if n == 0 {
        return Err(FitError::EmptyData);
    }
    if bounds.len() != n {
        return Err(FitError::LengthMismatch {
            expected: n,
            actual: bounds.len(),
        });
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FitError::BadBounds { lo, hi });
        }
    }

    let mut p = initial.to_vec();
    clip_to_bounds(&mut p, bounds);
    let mut residuals = f(&p)?;
    finite_residuals(&residuals)?;
    let m = residuals.len();
    if m == 0 {
        return Err(FitError::EmptyData);
    }
    if m < n {
        return Err(FitError::UnderDetermined { m, n });
    }
    let mut cost = cost_of(&residuals);
    let mut lambda = options.lambda_init;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for iter in 1..=options.max_iterations {
        iterations = iter;
        let Some(jt) = jacobian(&f, &p, bounds)? else {
            break; // model failed near the iterate; report best-so-far
        };
        // Gradient g = Jᵀr and normal matrix A = JᵀJ.
        let g: Vec<f64> = jt
            .iter()
            .map(|col| col.iter().zip(&residuals).map(|(a, r)| a * r).sum())
            .collect();
        if g.iter().map(|x| x.abs()).fold(0.0, f64::max) < options.gtol {
            converged = true;
            break;
        }
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| jt[i].iter().zip(&jt[j]).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();

        loop {
            // Marquardt scaling with a floored diagonal keeps the damped
            // system solvable even for momentarily flat parameters.
            let mut damped = a.clone();
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] += lambda * a[j][j].max(1e-12);
            }
            let mut rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            let step = solve_dense(&mut damped, &mut rhs);
            // Relative step tolerance on the proposal itself: when even the
            // damped update cannot move the iterate, further damping only
            // shrinks it more, so the search is finished whether or not
            // this particular trial lowers the cost.
            if let Some(delta) = &step {
                let negligible = delta
                    .iter()
                    .zip(&p)
                    .all(|(d, x)| d.abs() <= options.xtol * (x.abs() + 1e-30));
                if negligible {
                    converged = true;
                    break 'outer;
                }
            }
            let accepted = step.and_then(|delta| {
                let mut trial = p.clone();
                for (x, d) in trial.iter_mut().zip(&delta) {
                    *x += d;
                }
                clip_to_bounds(&mut trial, bounds);
                let trial_residuals = f(&trial).ok()?;
                if trial_residuals.len() != m
                    || trial_residuals.iter().any(|r| !r.is_finite())
                {
                    return None;
                }
                let trial_cost = cost_of(&trial_residuals);
                (trial_cost < cost).then_some((trial, trial_residuals, trial_cost))
            });
            match accepted {
                Some((trial, trial_residuals, trial_cost)) => {
                    let small_step = trial
                        .iter()
                        .zip(&p)
                        .all(|(new, old)| (new - old).abs() <= options.xtol * (old.abs() + 1e-30));
                    p = trial;
                    residuals = trial_residuals;
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    if small_step {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > options.lambda_max {
                        break 'outer; // stuck; report best-so-far
                    }
                }
            }
        }
    }

    let stderr = parameter_stderr(&f, &p, bounds, cost, m)?;
    Ok(FitResult {
        params: p,
        cost,
        iterations,
        converged,
        stderr,
    })
}

/// Asymptotic one-sigma uncertainties from the final-iterate normal
/// matrix. NaN-filled when the degrees of freedom or the matrix give out.
fn parameter_stderr<F>(
    f: &F,
    p: &[f64],
    bounds: &[(f64, f64)],
    cost: f64,
    m: usize,
) -> Result<Vec<f64>, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = p.len();
    if m <= n {
        return Ok(vec![f64::NAN; n]);
    }
    let Some(jt) = jacobian(f, p, bounds)? else {
        return Ok(vec![f64::NAN; n]);
    };
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| jt[i].iter().zip(&jt[j]).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    let sigma2 = cost / (m - n) as f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut lhs = a.clone();
        let mut rhs = vec![0.0; n];
        rhs[k] = 1.0;
        match solve_dense(&mut lhs, &mut rhs) {
            Some(col) if col[k] >= 0.0 => out.push((sigma2 * col[k]).sqrt()),
            _ => out.push(f64::NAN),
        }
    }
    Ok(out)
}

/// Isotherm fit outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsothermFit {
    /// Dissociation constant [M].
    pub kd_molar: f64,
    /// Saturation current step [µA], signed like the data.
    pub delta_i_sat_ua: f64,
    /// One-sigma uncertainty on `kd_molar` [M].
    pub kd_stderr_molar: f64,
    /// One-sigma uncertainty on `delta_i_sat_ua` [µA].
    pub sat_stderr_ua: f64,
    /// Sum of squared residuals [µA²].
    pub cost: f64,
    /// Iterations consumed.
    pub iterations: usize,
    /// Whether the engine stopped on a convergence criterion.
    pub converged: bool,
}

/// Half-saturation seed: the concentration where the response magnitude
/// crosses half its largest observed value, log-interpolated between the
/// straddling points.
fn isotherm_initial_guess(points: &[SensingPoint]) -> (f64, f64) {
    let mut sorted: Vec<&SensingPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.concentration_molar.total_cmp(&b.concentration_molar));
    let top = sorted
        .iter()
        .map(|p| p.delta_i_ua.abs())
        .fold(0.0, f64::max);
    let half = 0.5 * top;
    let mut kd = sorted[sorted.len() / 2].concentration_molar;
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (a.delta_i_ua.abs(), b.delta_i_ua.abs());
        if ya <= half && half <= yb && yb > ya {
            let frac = (half - ya) / (yb - ya);
            let (la, lb) = (
                a.concentration_molar.max(1e-30).ln(),
                b.concentration_molar.max(1e-30).ln(),
            );
            kd = (la + frac * (lb - la)).exp();
            break;
        }
    }
    let c_max = sorted.last().unwrap().concentration_molar;
    let di_max = sorted.last().unwrap().delta_i_ua;
    let sat = di_max * (c_max + kd) / c_max;
    (kd, sat)
}

/// Fit the binding isotherm `ΔI = ΔI_sat·c/(c + K_D)` to equilibrium
/// sensing points (at least three, positive concentrations).
pub fn fit_isotherm(points: &[SensingPoint], options: &FitOptions) -> Result<IsothermFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::UnderDetermined {
            m: points.len(),
            n: 2,
        });
    }
    for (index, p) in points.iter().enumerate() {
        if !(p.concentration_molar.is_finite() && p.concentration_molar > 0.0) {
            return Err(FitError::NonFinite {
                what: "concentration",
                index,
            });
        }
        if !p.delta_i_ua.is_finite() {
            return Err(FitError::NonFinite {
                what: "current step",
                index,
            });
        }
    }
    let (kd0, sat0) = isotherm_initial_guess(points);
    let sat_span = 1e3 * sat0.abs().max(1e-6);
    let bounds = [(1e-15, 1.0), (-sat_span, sat_span)];
    let data: Vec<SensingPoint> = points.to_vec();
    let result = fit_least_squares(
        |p| {
            let (kd, sat) = (p[0], p[1]);
            Ok(data
                .iter()
                .map(|pt| sat * pt.concentration_molar / (pt.concentration_molar + kd) - pt.delta_i_ua)
                .collect())
        },
        &[kd0, sat0],
        &bounds,
        options,
    )?;
    Ok(IsothermFit {
        kd_molar: result.params[0],
        delta_i_sat_ua: result.params[1],
        kd_stderr_molar: result.stderr[0],
        sat_stderr_ua: result.stderr[1],
        cost: result.cost,
        iterations: result.iterations,
        converged: result.converged,
    })
}

impl IsothermFit {
    /// Fitted Langmuir prediction at one concentration [µA].
    pub fn model_ua(&self, concentration_molar: f64) -> f64 {
        self.delta_i_sat_ua * concentration_molar / (concentration_molar + self.kd_molar)
    }
}

/// Kinetics fit outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticsFit {
    /// Association rate constant [1/(M·s)].
    pub k_on_per_molar_s: f64,
    /// Dissociation rate constant [1/s].
    pub k_off_per_s: f64,
    /// Equilibrium current step the association leg would reach [µA].
    pub delta_i_eq_ua: f64,
    /// Derived dissociation constant `k_off/k_on` [M].
    pub kd_molar: f64,
    /// One-sigma uncertainties on the three fit parameters.
    pub k_on_stderr: f64,
    pub k_off_stderr: f64,
    pub delta_i_eq_stderr: f64,
    /// Sum of squared residuals [µA²].
    pub cost: f64,
    /// Iterations consumed.
    pub iterations: usize,
    /// Whether the engine stopped on a convergence criterion.
    pub converged: bool,
}

impl KineticsFit {
    /// Fitted two-phase prediction at one instant [µA]; `t_d_s` and
    /// `c_molar` must match the values the fit ran with.
    pub fn model_ua(&self, t_s: f64, t_d_s: f64, c_molar: f64) -> f64 {
        two_phase_model(
            t_s,
            t_d_s,
            c_molar,
            self.k_on_per_molar_s,
            self.k_off_per_s,
            self.delta_i_eq_ua,
        )
    }
}

/// Two-phase transient the kinetics fitter matches: association from `t=0`
/// toward `ΔI_eq` at rate `k_on·c + k_off`, then exponential release at
/// `k_off` from the value reached at `t_d`.
fn two_phase_model(t: f64, t_d: f64, c: f64, k_on: f64, k_off: f64, di_eq: f64) -> f64 {
    let rate = k_on * c + k_off;
    if t <= t_d {
        di_eq * (1.0 - (-rate * t).exp())
    } else {
        let di_td = di_eq * (1.0 - (-rate * t_d).exp());
        di_td * (-k_off * (t - t_d)).exp()
    }
}

/// Log-linear regression seed for the release rate: slope of `ln|ΔI|` over
/// the dissociation tail.
fn dissociation_rate_guess(times: &[f64], values: &[f64], t_d: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > t_d && v.abs() > 0.0)
        .map(|(&t, &v)| (t - t_d, v.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope < 0.0).then_some(-slope)
}

/// Fit association and dissociation rate constants to one switching
/// transient sampled at `times_s` (association starts at `t = 0`, the
/// ligand is removed at `t_d_s`). `dissociation_weight` scales the
/// residuals past `t_d_s`; `1.0` treats both phases equally.
pub fn fit_kinetics(
    times_s: &[f64],
    delta_i_ua: &[f64],
    c_molar: f64,
    t_d_s: f64,
    dissociation_weight: f64,
    options: &FitOptions,
) -> Result<KineticsFit, FitError> {
    if times_s.is_empty() {
        return Err(FitError::EmptyData);
    }
    if times_s.len() != delta_i_ua.len() {
        return Err(FitError::LengthMismatch {
            expected: times_s.len(),
            actual: delta_i_ua.len(),
        });
    }
    if !(c_molar.is_finite() && c_molar > 0.0) {
        return Err(FitError::NotPositive {
            name: "concentration",
            value: c_molar,
        });
    }
    if !(t_d_s.is_finite() && t_d_s > 0.0) {
        return Err(FitError::NotPositive {
            name: "switch time",
            value: t_d_s,
        });
    }
    if !(dissociation_weight.is_finite() && dissociation_weight > 0.0) {
        return Err(FitError::NotPositive {
            name: "dissociation weight",
            value: dissociation_weight,
        });
    }
    for (index, (&t, &v)) in times_s.iter().zip(delta_i_ua).enumerate() {
        if !t.is_finite() {
            return Err(FitError::NonFinite { what: "time", index });
        }
        if !v.is_finite() {
            return Err(FitError::NonFinite {
                what: "current step",
                index,
            });
        }
    }

    // Seed amplitude from the deepest association excursion, release rate
    // from the tail regression, and the on-rate from the half-rise time.
    let di_eq0 = times_s
        .iter()
        .zip(delta_i_ua)
        .filter(|(&t, _)| t <= t_d_s)
        .map(|(_, &v)| v)
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(delta_i_ua[0]);
    let di_eq0 = if di_eq0 == 0.0 { -1e-3 } else { di_eq0 };
    let k_off0 = dissociation_rate_guess(times_s, delta_i_ua, t_d_s).unwrap_or(1e-3);
    let half_rise = times_s
        .iter()
        .zip(delta_i_ua)
        .find(|(&t, &v)| t <= t_d_s && v.abs() >= 0.5 * di_eq0.abs())
        .map(|(&t, _)| t.max(1e-6));
    let rate0 = half_rise.map_or(10.0 * k_off0, |t| std::f64::consts::LN_2 / t);
    let k_on0 = ((rate0 - k_off0) / c_molar).max(0.1 * rate0 / c_molar);

    let bounds = [(1e-9, 1e15), (1e-12, 1e6), {
        let span = 1e3 * di_eq0.abs();
        (-span, span)
    }];
    let times = times_s.to_vec();
    let data = delta_i_ua.to_vec();
    let w = dissociation_weight;
    let result = fit_least_squares(
        |p| {
            let (k_on, k_off, di_eq) = (p[0], p[1], p[2]);
            Ok(times
                .iter()
                .zip(&data)
                .map(|(&t, &y)| {
                    let weight = if t > t_d_s { w } else { 1.0 };
                    weight * (two_phase_model(t, t_d_s, c_molar, k_on, k_off, di_eq) - y)
                })
                .collect())
        },
        &[k_on0, k_off0, di_eq0],
        &bounds,
        options,
    )?;
    Ok(KineticsFit {
        k_on_per_molar_s: result.params[0],
        k_off_per_s: result.params[1],
        delta_i_eq_ua: result.params[2],
        kd_molar: result.params[1] / result.params[0],
        k_on_stderr: result.stderr[0],
        k_off_stderr: result.stderr[1],
        delta_i_eq_stderr: result.stderr[2],
        cost: result.cost,
        iterations: result.iterations,
        converged: result.converged,
    })
}
