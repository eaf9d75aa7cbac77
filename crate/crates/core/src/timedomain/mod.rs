//! Time-domain qubit fits: energy relaxation, Ramsey, Hahn echo, Rabi
//! chevrons, and statistics over repeated lifetime measurements.
//!
//! Traces carry delays in seconds; fitted times are reported in µs.

mod chevron;
mod stats;

pub use chevron::{chevron_linewidth_hz, fit_chevron, rabi_population, ChevronFit, ChevronGrid};
pub use stats::{distribution_stats, locate_peak, FitMethod, LifetimeDistribution};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::lsq::{self, LeastSquares, LmOptions};
use crate::{Error, Result, Warning};

pub const MIN_DECAY_POINTS: usize = 10;
/// Fewer visible periods than this make the Ramsey detuning poorly conditioned.
const MIN_RAMSEY_CYCLES: f64 = 2.0;
/// Below this the oscillation is not resolved and a plain exponential is fitted.
const EXPONENTIAL_FALLBACK_CYCLES: f64 = 0.5;
/// Decay times this far beyond the measured window are not resolved.
const MAX_TIME_OVER_SPAN: f64 = 20.0;

/// Excited-state population (or raw readout signal) versus delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub delays_s: Vec<f64>,
    pub populations: Vec<f64>,
}

impl DecayTrace {
    pub fn new(delays_s: Vec<f64>, populations: Vec<f64>) -> Result<Self> {
        if delays_s.len() != populations.len() {
            return Err(Error::Domain(format!(
                "{} delays but {} populations",
                delays_s.len(),
                populations.len()
            )));
        }
        if delays_s.len() < MIN_DECAY_POINTS {
            return Err(Error::InsufficientData(format!(
                "decay trace needs >= {MIN_DECAY_POINTS} points, got {}",
                delays_s.len()
            )));
        }
        if delays_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("delays must be strictly ascending".into()));
        }
        if populations.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("populations must be finite".into()));
        }
        Ok(Self { delays_s, populations })
    }

    fn delays_us(&self) -> Vec<f64> {
        self.delays_s.iter().map(|t| t * 1e6).collect()
    }

    fn span_us(&self) -> f64 {
        (self.delays_s[self.delays_s.len() - 1] - self.delays_s[0]) * 1e6
    }

    /// Maps raw readout values onto [0, 1] using the asymptotes of an
    /// exponential fit: the t = 0 intercept becomes 1 and the baseline 0.
    pub fn normalized(&self) -> Result<DecayTrace> {
        let fit = fit_t1(self)?;
        let populations = self.populations.iter().map(|v| (v - fit.offset) / fit.amplitude).collect();
        Ok(DecayTrace { delays_s: self.delays_s.clone(), populations })
    }
}

/// Result of fitting A exp(-t/T) + B.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub time_us: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub sigma_time_us: f64,
    pub sigma_amplitude: f64,
    pub sigma_offset: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

struct ExpProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LeastSquares for ExpProblem<'_> {
    // x = [ln T, A, B]
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let tau = x[0].exp();
        DVector::from_iterator(self.t.len(), self.t.iter().zip(self.y).map(|(&t, &y)| x[1] * (-t / tau).exp() + x[2] - y))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let tau = x[0].exp();
        DMatrix::from_fn(self.t.len(), 3, |i, j| {
            let e = (-self.t[i] / tau).exp();
            match j {
                0 => x[1] * e * self.t[i] / tau,
                1 => e,
                _ => 1.0,
            }
        })
    }
}

/// Best (A, B) for a fixed decay time, and the resulting squared residual.
fn linear_exp(t: &[f64], y: &[f64], tau: f64) -> Option<(f64, f64, f64)> {
    let a = DMatrix::from_fn(t.len(), 2, |i, j| if j == 0 { (-t[i] / tau).exp() } else { 1.0 });
    let c = lsq::linear_lstsq(&a, &DVector::from_column_slice(y))?;
    let cost = (&a * &c - DVector::from_column_slice(y)).norm_squared();
    Some((c[0], c[1], cost))
}

/// Decay time from a straight-line fit to ln|y - baseline|, the baseline being
/// the mean of the last tenth of the trace.
fn log_linear_guess(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len();
    let tail = (n / 10).max(2);
    let base = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let dev: Vec<f64> = y.iter().map(|v| v - base).collect();
    let peak = dev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let pts: Vec<(f64, f64)> =
        t.iter().zip(&dev).filter(|(_, d)| d.abs() > 0.05 * peak).map(|(&t, d)| (t, d.abs().ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}

fn fit_exponential(trace: &DecayTrace, label: &str) -> Result<ExpFit> {
    let t = trace.delays_us();
    let y = &trace.populations;
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return Err(Error::FitFailure(format!("{label}: trace is constant, nothing decays")));
    }

    // Start from the log-linear estimate unless a coarse scan of decay times
    // finds a clearly better starting point.
    let span = trace.span_us();
    let step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut candidates: Vec<f64> = (0..=48).map(|i| 0.5 * step * (40.0 * span / step).powf(i as f64 / 48.0)).collect();
    let guess = log_linear_guess(&t, y);
    candidates.extend(guess);
    let mut best = (f64::INFINITY, span, 0.0, 0.0);
    for tau in candidates {
        if let Some((a, b, c)) = linear_exp(&t, y, tau) {
            let better = c < best.0 * (1.0 - 1e-9) || (Some(tau) == guess && c <= best.0 * (1.0 + 1e-9));
            if better {
                best = (c, tau, a, b);
            }
        }
    }
    let problem = ExpProblem { t: &t, y };
    let sol = lsq::minimize(&problem, DVector::from_vec(vec![best.1.ln(), best.2, best.3]), LmOptions::default())?;
    let tau = sol.x[0].exp();
    let se = sol
        .standard_errors()
        .ok_or_else(|| Error::FitFailure(format!("{label}: singular covariance, decay not constrained")))?;
    if tau > MAX_TIME_OVER_SPAN * span || sol.x[1].abs() <= 2.0 * se[1] && se[1] > 0.0 {
        return Err(Error::FitFailure(format!(
            "{label}: no significant decay (T = {tau:.4e} µs over a {span:.4e} µs window, A = {:.3e} ± {:.1e})",
            sol.x[1], se[1]
        )));
    }
    Ok(ExpFit {
        time_us: tau,
        amplitude: sol.x[1],
        offset: sol.x[2],
        sigma_time_us: se[0] * tau,
        sigma_amplitude: se[1],
        sigma_offset: se[2],
        residual_rms: (sol.cost / t.len() as f64).sqrt(),
        converged: sol.converged,
        warnings: Vec::new(),
    })
}

/// Energy relaxation: A exp(-t/T1) + B.
pub fn fit_t1(trace: &DecayTrace) -> Result<ExpFit> {
    fit_exponential(trace, "T1")
}

/// Hahn echo envelope: A exp(-t/T2E) + B.
pub fn fit_echo(trace: &DecayTrace) -> Result<ExpFit> {
    fit_exponential(trace, "T2E")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyFit {
    pub t2_star_us: f64,
    /// As fitted; the sign is not physically resolved by a single quadrature.
    pub detuning_hz: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub sigma_t2_star_us: f64,
    pub sigma_detuning_hz: f64,
    pub sigma_phase: f64,
    pub residual_rms: f64,
    /// False when the oscillation was unresolved and an exponential was fitted.
    pub oscillating: bool,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

struct RamseyProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LeastSquares for RamseyProblem<'_> {
    // x = [ln T2, f (MHz), phase, A, B]
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let tau = x[0].exp();
        DVector::from_iterator(
            self.t.len(),
            self.t
                .iter()
                .zip(self.y)
                .map(|(&t, &y)| x[3] * (-t / tau).exp() * (2.0 * PI * x[1] * t + x[2]).cos() + x[4] - y),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let tau = x[0].exp();
        DMatrix::from_fn(self.t.len(), 5, |i, j| {
            let t = self.t[i];
            let e = (-t / tau).exp();
            let arg = 2.0 * PI * x[1] * t + x[2];
            match j {
                0 => x[3] * e * arg.cos() * t / tau,
                1 => -x[3] * e * arg.sin() * 2.0 * PI * t,
                2 => -x[3] * e * arg.sin(),
                3 => e * arg.cos(),
                _ => 1.0,
            }
        })
    }
}

/// Frequency (MHz) of the largest peak of the mean-subtracted periodogram.
fn dominant_frequency(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let span = t[n - 1] - t[0];
    let nyquist = 0.5 * (n - 1) as f64 / span;
    let df = 0.25 / span;
    let mut best = (0.0, df);
    let mut f = df;
    while f <= nyquist {
        let (mut c, mut s) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let w = 2.0 * PI * f * ti;
            c += (yi - mean) * w.cos();
            s += (yi - mean) * w.sin();
        }
        let power = c * c + s * s;
        if power > best.0 {
            best = (power, f);
        }
        f += df;
    }
    best.1
}

/// Ramsey fringes: A exp(-t/T2*) cos(2 pi df t + phase) + B, detuning free.
///
/// When less than half a period is visible the detuning is not resolved and
/// the trace is fitted as a plain exponential instead, with a warning.
pub fn fit_ramsey(trace: &DecayTrace) -> Result<RamseyFit> {
    let span = trace.span_us();
    let cycles = match fit_fringes(trace) {
        Ok(fit) if fit.detuning_hz.abs() * 1e-6 * span >= EXPONENTIAL_FALLBACK_CYCLES => return Ok(fit),
        Ok(fit) => fit.detuning_hz.abs() * 1e-6 * span,
        Err(_) => 0.0,
    };
    let exp = fit_exponential(trace, "T2*")?;
    Ok(RamseyFit {
        t2_star_us: exp.time_us,
        detuning_hz: 0.0,
        phase: 0.0,
        amplitude: exp.amplitude,
        offset: exp.offset,
        sigma_t2_star_us: exp.sigma_time_us,
        sigma_detuning_hz: f64::NAN,
        sigma_phase: f64::NAN,
        residual_rms: exp.residual_rms,
        oscillating: false,
        converged: exp.converged,
        warnings: vec![Warning::FewOscillations { cycles }],
    })
}

fn fit_fringes(trace: &DecayTrace) -> Result<RamseyFit> {
    let t = trace.delays_us();
    let y = &trace.populations;
    let span = trace.span_us();
    let f0 = dominant_frequency(&t, y);

    // Envelope scan with the quadratures and offset solved linearly.
    let step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    for i in 0..=48 {
        let tau = step * (40.0 * span / step).powf(i as f64 / 48.0);
        let a = DMatrix::from_fn(t.len(), 3, |r, c| {
            let e = (-t[r] / tau).exp();
            let w = 2.0 * PI * f0 * t[r];
            match c {
                0 => e * w.cos(),
                1 => e * w.sin(),
                _ => 1.0,
            }
        });
        let yv = DVector::from_column_slice(y);
        if let Some(c) = lsq::linear_lstsq(&a, &yv) {
            let cost = (&a * &c - &yv).norm_squared();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, tau, c));
            }
        }
    }
    let (_, tau0, c) = best.ok_or_else(|| Error::FitFailure("T2*: no starting point found".into()))?;
    let amp0 = c[0].hypot(c[1]);
    let phase0 = (-c[1]).atan2(c[0]);
    let problem = RamseyProblem { t: &t, y };
    let sol = lsq::minimize(&problem, DVector::from_vec(vec![tau0.ln(), f0, phase0, amp0, c[2]]), LmOptions::default())?;
    let se = sol.standard_errors().ok_or_else(|| Error::FitFailure("T2*: singular covariance".into()))?;

    let (mut amp, mut phase) = (sol.x[3], sol.x[2]);
    if amp < 0.0 {
        amp = -amp;
        phase += PI;
    }
    phase = (phase + PI).rem_euclid(2.0 * PI) - PI;
    let tau = sol.x[0].exp();
    let detuning_mhz = sol.x[1];
    let cycles = detuning_mhz.abs() * span;
    let mut warnings = Vec::new();
    if cycles < MIN_RAMSEY_CYCLES {
        warnings.push(Warning::FewOscillations { cycles });
    }
    Ok(RamseyFit {
        t2_star_us: tau,
        detuning_hz: detuning_mhz * 1e6,
        phase,
        amplitude: amp,
        offset: sol.x[4],
        sigma_t2_star_us: se[0] * tau,
        sigma_detuning_hz: se[1] * 1e6,
        sigma_phase: se[2],
        residual_rms: (sol.cost / t.len() as f64).sqrt(),
        oscillating: true,
        converged: sol.converged,
        warnings,
    })
}
