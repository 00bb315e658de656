//! Monoexponential least squares: y = A·exp(−t/τ) + c.
//!
//! Damped Gauss–Newton (Levenberg–Marquardt) with an analytic Jacobian. The
//! model is evaluated on t − t₀ internally (t₀ the first sample) so that
//! traces starting far from zero stay well conditioned; the reported
//! amplitude refers to t = 0.

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::spectrum::Spectrum;

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpParams {
    pub amplitude: f64,
    pub time_constant: f64,
    pub offset: f64,
}

impl ExpParams {
    pub fn new(amplitude: f64, time_constant: f64, offset: f64) -> Self {
        ExpParams {
            amplitude,
            time_constant,
            offset,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.time_constant).exp() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ExpParams,
    pub std_errors: ExpParams,
    /// √(Σ residual²)
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// τ ended on its search bound.
    pub at_bound: bool,
    pub diagnostic: Option<String>,
}

/// Residuals y − model.
pub fn residuals(t: &[f64], y: &[f64], p: &ExpParams) -> Vec<f64> {
    t.iter().zip(y).map(|(&ti, &yi)| yi - p.eval(ti)).collect()
}

/// ∂/∂(A, τ, c) of ½·Σ(y − model)².
pub fn objective_gradient(t: &[f64], y: &[f64], p: &ExpParams) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / p.time_constant).exp();
        let r = yi - p.eval(ti);
        g[0] -= r * e;
        g[1] -= r * p.amplitude * e * ti / (p.time_constant * p.time_constant);
        g[2] -= r;
    }
    g
}

fn check_trace(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() {
        return Err(invalid("trace", "time and value lengths differ"));
    }
    if t.len() < 4 {
        return Err(invalid("trace", format!("{} samples, at least 4 required", t.len())));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("trace", "non-finite sample"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("trace", "time axis is not strictly increasing"));
    }
    Ok(())
}

/// Log-linear estimate on baseline-subtracted data, shifted time.
fn initial_guess(s: &[f64], y: &[f64]) -> [f64; 3] {
    let n = y.len();
    let tail = (n / 10).max(1);
    let c0 = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let head = y[0] - c0;
    let span = s[n - 1];
    let sign = if head >= 0.0 { 1.0 } else { -1.0 };
    let floor = 0.05 * head.abs();
    let pts: Vec<(f64, f64)> = s
        .iter()
        .zip(y)
        .filter_map(|(&si, &yi)| {
            let v = sign * (yi - c0);
            (v > floor).then(|| (si, v.ln()))
        })
        .collect();
    let mut tau = span / 3.0;
    let mut amp = head;
    if pts.len() >= 2 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let den = m * sxx - sx * sx;
        if den > 0.0 {
            let slope = (m * sxy - sx * sy) / den;
            let icpt = (sy - slope * sx) / m;
            if slope < 0.0 {
                tau = -1.0 / slope;
                amp = sign * icpt.exp();
            }
        }
    }
    [amp, tau, c0]
}

struct Problem<'a> {
    s: &'a [f64],
    y: &'a [f64],
}

impl Problem<'_> {
    fn ssr(&self, p: &[f64; 3]) -> f64 {
        self.s
            .iter()
            .zip(self.y)
            .map(|(&si, &yi)| {
                let r = yi - (p[0] * (-si / p[1]).exp() + p[2]);
                r * r
            })
            .sum()
    }

    /// (JᵀJ, Jᵀr) for the model Jacobian J and residual r = y − model.
    fn normal_equations(&self, p: &[f64; 3]) -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&si, &yi) in self.s.iter().zip(self.y) {
            let e = (-si / p[1]).exp();
            let row = Vector3::new(e, p[0] * e * si / (p[1] * p[1]), 1.0);
            let r = yi - (p[0] * e + p[2]);
            jtj += row * row.transpose();
            jtr += row * r;
        }
        (jtj, jtr)
    }
}

pub fn fit_mono_exponential(t: &[f64], y: &[f64], guess: Option<ExpParams>) -> Result<FitResult> {
    check_trace(t, y)?;
    let n = t.len();
    let t0 = t[0];
    let s: Vec<f64> = t.iter().map(|ti| ti - t0).collect();
    let span = s[n - 1];
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let y_range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    let mean = y.iter().sum::<f64>() / n as f64;

    let flat = |iterations, msg: &str| FitResult {
        params: ExpParams::new(0.0, f64::INFINITY, mean),
        std_errors: ExpParams::new(f64::NAN, f64::NAN, f64::NAN),
        residual_norm: y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt(),
        converged: false,
        iterations,
        at_bound: false,
        diagnostic: Some(msg.to_string()),
    };
    if y_range <= 1e-12 * y_scale.max(f64::MIN_POSITIVE) {
        return Ok(flat(0, "constant trace: no decay to fit"));
    }

    let tau_min = 1e-3 * (span / (n - 1) as f64);
    let tau_max = 1e3 * span;
    let mut p = match guess {
        Some(g) => [g.amplitude * (-t0 / g.time_constant).exp(), g.time_constant, g.offset],
        None => initial_guess(&s, y),
    };
    if !(p[1].is_finite() && p[1] > 0.0) {
        p[1] = span / 3.0;
    }
    p[1] = p[1].clamp(tau_min, tau_max);
    let prob = Problem { s: &s, y };
    let scale = [y_range.max(1e-300), span, y_range.max(1e-300)];

    let mut lambda = 1e-3;
    let mut cost = prob.ssr(&p);
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = prob.normal_equations(&p);
        loop {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            let mut trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            trial[1] = trial[1].clamp(tau_min, tau_max);
            let trial_cost = prob.ssr(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = (0..3).all(|k| (trial[k] - p[k]).abs() <= STEP_TOLERANCE * (p[k].abs() + scale[k]));
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-12);
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill step left: at the minimum to working precision
                converged = true;
                break 'outer;
            }
        }
    }

    let at_bound = p[1] <= tau_min * (1.0 + 1e-9) || p[1] >= tau_max * (1.0 - 1e-9);
    let decays = p[0].abs() > 1e-9 * y_range;
    let mut diagnostic = None;
    if at_bound {
        diagnostic = Some(format!("time constant reached its bound ({:.4e})", p[1]));
    } else if !decays {
        diagnostic = Some("fitted amplitude vanishes: trace does not decay".into());
    } else if !converged {
        diagnostic = Some(format!("no convergence after {iterations} iterations"));
    }
    let converged = converged && !at_bound && decays;

    // covariance in internal coordinates, then mapped to t = 0 amplitude
    let (jtj, _) = prob.normal_equations(&p);
    let dof = (n as f64 - 3.0).max(1.0);
    let s2 = cost / dof;
    let shift = (t0 / p[1]).exp();
    let amplitude = p[0] * shift;
    let std_errors = match jtj.try_inverse() {
        Some(cov) => {
            let cov = cov * s2;
            let g = Matrix3::new(
                shift,
                -p[0] * shift * t0 / (p[1] * p[1]),
                0.0,
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                1.0,
            );
            let c = g * cov * g.transpose();
            ExpParams::new(c[(0, 0)].max(0.0).sqrt(), c[(1, 1)].max(0.0).sqrt(), c[(2, 2)].max(0.0).sqrt())
        }
        None => ExpParams::new(f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(FitResult {
        params: ExpParams::new(amplitude, p[1], p[2]),
        std_errors,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
        at_bound,
        diagnostic,
    })
}

/// Fit a time-axis spectrum.
pub fn fit_trace(trace: &Spectrum, guess: Option<ExpParams>) -> Result<FitResult> {
    fit_mono_exponential(&trace.axis, &trace.intensity, guess)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFit {
    /// Approach to the illuminated steady state.
    pub during: FitResult,
    /// Dark recovery after light-off.
    pub after: FitResult,
    /// during(light-off) − after(light-off); continuity is not enforced.
    pub boundary_gap: f64,
}

/// Independent fits of [0, light-off] and [light-off, end]; time zero is light onset.
pub fn fit_piecewise_recovery(trace: &Spectrum, light_off_us: f64) -> Result<PiecewiseFit> {
    fit_piecewise_recovery_from(trace, 0.0, light_off_us)
}

pub fn fit_piecewise_recovery_from(trace: &Spectrum, light_on_us: f64, light_off_us: f64) -> Result<PiecewiseFit> {
    let (Some(&first), Some(&last)) = (trace.axis.first(), trace.axis.last()) else {
        return Err(invalid("trace", "empty"));
    };
    if !(light_off_us > first && light_off_us < last) {
        return Err(invalid(
            "light-off time",
            format!("{light_off_us} µs is not inside the trace span [{first}, {last}] µs"),
        ));
    }
    if !(light_on_us < light_off_us) {
        return Err(invalid("light-on time", "must precede light-off"));
    }
    let segment = |lo: f64, hi: f64| -> (Vec<f64>, Vec<f64>) {
        trace
            .axis
            .iter()
            .zip(&trace.intensity)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, y)| (*t, *y))
            .unzip()
    };
    let (t_on, y_on) = segment(light_on_us, light_off_us);
    let (t_off, y_off) = segment(light_off_us, f64::INFINITY);
    for (name, len) in [("during-light", t_on.len()), ("after-light", t_off.len())] {
        if len < 4 {
            return Err(Error::SegmentTooShort {
                segment: name,
                samples: len,
            });
        }
    }
    let during = fit_mono_exponential(&t_on, &y_on, None)?;
    let after = fit_mono_exponential(&t_off, &y_off, None)?;
    let at = |f: &FitResult| if f.converged { f.params.eval(light_off_us) } else { f.params.offset };
    Ok(PiecewiseFit {
        boundary_gap: at(&during) - at(&after),
        during,
        after,
    })
}
