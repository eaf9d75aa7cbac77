//! Circle fit of notch-resonator S21 data.
//!
//! The algebraic pipeline (delay removal, circle fit, canonical phase fit,
//! diameter/offset read-out) only provides the starting point; the reported
//! parameters and their standard errors come from a final least-squares fit
//! of the complete complex model to every sample with uniform weights.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{NotchParams, S21Trace};
use crate::lsq::{self, LeastSquares, LmOptions};
use crate::{Error, Result, Warning};

/// Fraction of the span, at each end, used to estimate the cable delay.
const DELAY_EDGE_FRACTION: f64 = 0.10;
/// Spans shorter than this many linewidths raise [`Warning::NarrowSpan`].
const MIN_SPAN_LINEWIDTHS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NotchErrors {
    pub fr_hz: f64,
    pub ql: f64,
    pub qc_mag: f64,
    pub phi0: f64,
    pub tau_s: f64,
    pub a: f64,
    pub alpha: f64,
    pub qi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotchFit {
    pub params: NotchParams,
    pub qi: f64,
    /// One-sigma standard errors from the final fit covariance.
    pub errors: NotchErrors,
    /// RMS of |S21_data - S21_model| relative to the off-resonant amplitude.
    pub residual_rms: f64,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

impl NotchFit {
    pub fn fr_hz(&self) -> f64 {
        self.params.fr_hz
    }
}

pub fn circle_fit(trace: &S21Trace) -> Result<NotchFit> {
    let guess = initial_guess(trace)?;
    refine(trace, guess)
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    center: Complex64,
    radius: f64,
}

/// Algebraic (Kasa) circle fit; returns the circle and the RMS radial residual.
fn fit_circle(z: &[Complex64]) -> Option<(Circle, f64)> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<Complex64>() / n;
    let a = DMatrix::from_fn(z.len(), 3, |i, j| {
        let w = z[i] - mean;
        match j {
            0 => w.re,
            1 => w.im,
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(z.len(), z.iter().map(|w| -(w - mean).norm_sqr()));
    let c = lsq::linear_lstsq(&a, &y)?;
    let center = Complex64::new(-c[0] / 2.0, -c[1] / 2.0);
    let r2 = center.norm_sqr() - c[2];
    if !(r2 > 0.0) {
        return None;
    }
    let radius = r2.sqrt();
    let rms = (z.iter().map(|w| ((w - mean - center).norm() - radius).powi(2)).sum::<f64>() / n).sqrt();
    Some((Circle { center: center + mean, radius }, rms))
}

fn unwrap(phases: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let mut d = p - prev;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                out.push(prev + d);
            }
        }
    }
    out
}

fn remove_delay(trace: &S21Trace, tau: f64) -> Vec<Complex64> {
    trace
        .freqs
        .iter()
        .zip(&trace.values)
        .map(|(&f, &z)| z * Complex64::from_polar(1.0, 2.0 * PI * f * tau))
        .collect()
}

/// Delay from a straight-line fit to the unwrapped phase of the outermost
/// samples at both ends of the span.
fn edge_delay(trace: &S21Trace) -> f64 {
    let n = trace.freqs.len();
    let k = ((n as f64 * DELAY_EDGE_FRACTION).ceil() as usize).max(3);
    let phase = unwrap(trace.values.iter().map(|z| z.arg()));
    // Remove the 2pi wind of the resonance between the two edges.
    let left: Vec<(f64, f64)> = (0..k).map(|i| (trace.freqs[i], phase[i])).collect();
    let right_offset = {
        let d = phase[n - k] - phase[k - 1];
        let slope_guess = (phase[k - 1] - phase[0]) / (trace.freqs[k - 1] - trace.freqs[0]);
        let predicted = slope_guess * (trace.freqs[n - k] - trace.freqs[k - 1]);
        2.0 * PI * ((d - predicted) / (2.0 * PI)).round()
    };
    let right: Vec<(f64, f64)> = (n - k..n).map(|i| (trace.freqs[i], phase[i] - right_offset)).collect();
    let pts: Vec<(f64, f64)> = left.into_iter().chain(right).collect();
    let m = pts.len() as f64;
    let fm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let pm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - fm) * (p.1 - pm)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - fm).powi(2)).sum();
    -(sxy / sxx) / (2.0 * PI)
}

/// Refines the delay so that the corrected data lie closest to a circle.
fn refine_delay(trace: &S21Trace, tau0: f64) -> f64 {
    let cost = |tau: f64| -> f64 {
        fit_circle(&remove_delay(trace, tau))
            .map(|(c, rms)| rms / c.radius.max(1e-300))
            .unwrap_or(f64::INFINITY)
    };
    // A wider window admits spurious windings that turn any trace into a circle.
    let width = 0.3 / trace.span();
    let steps = 80;
    let (mut best, mut best_cost) = (tau0, cost(tau0));
    for i in 0..=steps {
        let tau = tau0 - width + 2.0 * width * i as f64 / steps as f64;
        let c = cost(tau);
        if c < best_cost {
            best = tau;
            best_cost = c;
        }
    }
    // Golden-section search on the bracketing cell.
    let h = 2.0 * width / steps as f64;
    let (mut lo, mut hi) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut c1, mut c2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if c1 < c2 {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - g * (hi - lo);
            c1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + g * (hi - lo);
            c2 = cost(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    if cost(mid) <= best_cost {
        mid
    } else {
        best
    }
}

/// theta(f) = theta0 + 2 atan(2 Ql (1 - f/fr)) on the centred circle.
struct PhaseProblem<'a> {
    freqs: &'a [f64],
    phase: &'a [f64],
    fr_ref: f64,
    lw_ref: f64,
}

impl PhaseProblem<'_> {
    fn unpack(&self, x: &DVector<f64>) -> (f64, f64, f64) {
        (x[0], (x[1]).exp(), self.fr_ref + x[2] * self.lw_ref)
    }
}

impl LeastSquares for PhaseProblem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let (theta0, ql, fr) = self.unpack(x);
        DVector::from_iterator(
            self.freqs.len(),
            self.freqs
                .iter()
                .zip(self.phase)
                .map(|(&f, &p)| theta0 + 2.0 * (2.0 * ql * (1.0 - f / fr)).atan() - p),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (_, ql, fr) = self.unpack(x);
        DMatrix::from_fn(self.freqs.len(), 3, |i, j| {
            let f = self.freqs[i];
            let u = 2.0 * ql * (1.0 - f / fr);
            let d = 2.0 / (1.0 + u * u);
            match j {
                0 => 1.0,
                1 => d * u,
                _ => d * 2.0 * ql * f / (fr * fr) * self.lw_ref,
            }
        })
    }
}

fn initial_guess(trace: &S21Trace) -> Result<NotchParams> {
    let tau_edge = edge_delay(trace);

    // Noise from point-to-point scatter at the edges, where the resonance is flat.
    let z = remove_delay(trace, tau_edge);
    let n = z.len();
    let k = ((n as f64 * DELAY_EDGE_FRACTION).ceil() as usize).max(3);
    let edges: Vec<usize> = (0..k).chain(n - k..n).collect();
    let diffs: Vec<f64> = (1..k).chain(n - k + 1..n).map(|i| (z[i] - z[i - 1]).norm_sqr()).collect();
    let noise = (diffs.iter().sum::<f64>() / diffs.len() as f64 / 2.0).sqrt();
    let baseline = edges.iter().map(|&i| z[i]).sum::<Complex64>() / edges.len() as f64;
    let depth = z.iter().map(|w| (w - baseline).norm()).fold(0.0, f64::max);
    // The relative floor catches exactly flat traces, where the noise estimate is zero too.
    if depth < 5.0 * noise || depth <= 1e-9 * baseline.norm() {
        return Err(Error::FitFailure(format!(
            "no resonance found: largest excursion {depth:.3e} is below the noise level {noise:.3e}"
        )));
    }

    let tau = refine_delay(trace, tau_edge);
    let z = remove_delay(trace, tau);
    let (circle, _) =
        fit_circle(&z).ok_or_else(|| Error::FitFailure("degenerate data: no circle through S21".into()))?;
    if circle.radius < 3.0 * noise {
        return Err(Error::FitFailure(format!(
            "no resonance found: circle radius {:.3e} is below the noise level {noise:.3e}",
            circle.radius
        )));
    }

    let centred: Vec<f64> = unwrap(z.iter().map(|w| (w - circle.center).arg()));
    let i_min = trace
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .expect("non-empty trace");
    let fr0 = trace.freqs[i_min];
    let theta0 = centred[i_min];

    // Coarse scan of Ql before the local fit.
    let step = trace.freqs[1] - trace.freqs[0];
    let ql_lo = (fr0 / trace.span()).max(1.0);
    let ql_hi = (fr0 / step.max(1e-300)) * 10.0;
    let mut best = (f64::INFINITY, ql_lo);
    for i in 0..=60 {
        let ql = ql_lo * (ql_hi / ql_lo).powf(i as f64 / 60.0);
        let p = PhaseProblem { freqs: &trace.freqs, phase: &centred, fr_ref: fr0, lw_ref: fr0 / ql };
        let c = p.residuals(&DVector::from_vec(vec![theta0, ql.ln(), 0.0])).norm_squared();
        if c < best.0 {
            best = (c, ql);
        }
    }
    let ql0 = best.1;
    let problem = PhaseProblem { freqs: &trace.freqs, phase: &centred, fr_ref: fr0, lw_ref: fr0 / ql0 };
    let sol = lsq::minimize(&problem, DVector::from_vec(vec![theta0, ql0.ln(), 0.0]), LmOptions::default())?;
    let (theta0, ql, fr) = problem.unpack(&sol.x);

    let off_res = circle.center + Complex64::from_polar(circle.radius, theta0 + PI);
    let norm_center = circle.center / off_res;
    let norm_radius = circle.radius / off_res.norm();
    let phi0 = (Complex64::new(1.0, 0.0) - norm_center).arg();
    Ok(NotchParams {
        fr_hz: fr,
        ql,
        qc_mag: ql / (2.0 * norm_radius),
        phi0,
        tau_s: tau,
        a: off_res.norm(),
        alpha: off_res.arg(),
    })
}

/// Full complex-model least squares in scaled coordinates:
/// x = [(fr - fr0)/lw0, ln(Ql/Ql0), ln(Qc/Qc0), phi0, 2 pi span (tau - tau0), ln(a/a0), alpha].
struct NotchProblem<'a> {
    trace: &'a S21Trace,
    origin: NotchParams,
    lw0: f64,
    phase_scale: f64,
}

impl NotchProblem<'_> {
    fn unpack(&self, x: &DVector<f64>) -> NotchParams {
        let o = &self.origin;
        NotchParams {
            fr_hz: o.fr_hz + x[0] * self.lw0,
            ql: o.ql * x[1].exp(),
            qc_mag: o.qc_mag * x[2].exp(),
            phi0: x[3],
            tau_s: o.tau_s + x[4] / self.phase_scale,
            a: o.a * x[5].exp(),
            alpha: x[6],
        }
    }

    fn origin_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, 0.0, self.origin.phi0, 0.0, 0.0, self.origin.alpha])
    }

    /// d(physical)/d(scaled) for each parameter at `p`.
    fn scales(&self, p: &NotchParams) -> [f64; 7] {
        [self.lw0, p.ql, p.qc_mag, 1.0, 1.0 / self.phase_scale, p.a, 1.0]
    }
}

impl LeastSquares for NotchProblem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.unpack(x);
        let n = self.trace.freqs.len();
        let mut r = DVector::zeros(2 * n);
        for (i, (&f, &z)) in self.trace.freqs.iter().zip(&self.trace.values).enumerate() {
            let d = p.s21(f) - z;
            r[i] = d.re;
            r[n + i] = d.im;
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = self.unpack(x);
        let s = self.scales(&p);
        let n = self.trace.freqs.len();
        let i1 = Complex64::new(0.0, 1.0);
        let mut jac = DMatrix::zeros(2 * n, 7);
        for (i, &f) in self.trace.freqs.iter().enumerate() {
            let env = Complex64::from_polar(p.a, p.alpha - 2.0 * PI * f * p.tau_s);
            let xr = f / p.fr_hz - 1.0;
            let den = Complex64::new(1.0, 2.0 * p.ql * xr);
            let r = Complex64::from_polar(p.ql / p.qc_mag, p.phi0) / den;
            let s21 = env * (1.0 - r);
            let d = [
                -env * r * i1 * 2.0 * p.ql * f / (p.fr_hz * p.fr_hz * den),
                -env * (r / p.ql - r * i1 * 2.0 * xr / den),
                env * r / p.qc_mag,
                -env * i1 * r,
                -i1 * 2.0 * PI * f * s21,
                s21 / p.a,
                i1 * s21,
            ];
            for j in 0..7 {
                let v = d[j] * s[j];
                jac[(i, j)] = v.re;
                jac[(n + i, j)] = v.im;
            }
        }
        jac
    }
}

fn refine(trace: &S21Trace, guess: NotchParams) -> Result<NotchFit> {
    let problem = NotchProblem {
        trace,
        origin: guess,
        lw0: guess.linewidth_hz(),
        phase_scale: 2.0 * PI * trace.span(),
    };
    let sol = lsq::minimize(&problem, problem.origin_vector(), LmOptions::default())?;
    let params = problem.unpack(&sol.x);
    if !(params.ql > 0.0 && params.qc_mag > 0.0 && params.a > 0.0) {
        return Err(Error::FitFailure("fit converged to non-physical parameters".into()));
    }

    let scales = problem.scales(&params);
    let cov = sol.covariance().map(|c| DMatrix::from_fn(7, 7, |i, j| c[(i, j)] * scales[i] * scales[j]));
    let inv_qi = params.inverse_qi();
    let mut warnings = Vec::new();
    let qi = if inv_qi > 0.0 {
        1.0 / inv_qi
    } else {
        warnings.push(Warning::NegativeInternalLoss);
        f64::INFINITY
    };

    let errors = match &cov {
        Some(c) => {
            let se = |i: usize| c[(i, i)].max(0.0).sqrt();
            // Gradient of Qi with respect to (Ql, Qc, phi0).
            let q2 = qi * qi;
            let g = [
                q2 / (params.ql * params.ql),
                -q2 * params.phi0.cos() / (params.qc_mag * params.qc_mag),
                -q2 * params.phi0.sin() / params.qc_mag,
            ];
            let idx = [1, 2, 3];
            let mut var_qi = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    var_qi += g[a] * g[b] * c[(idx[a], idx[b])];
                }
            }
            NotchErrors {
                fr_hz: se(0),
                ql: se(1),
                qc_mag: se(2),
                phi0: se(3),
                tau_s: se(4),
                a: se(5),
                alpha: se(6),
                qi: if qi.is_finite() { var_qi.max(0.0).sqrt() } else { f64::INFINITY },
            }
        }
        None => return Err(Error::FitFailure("singular covariance in the final fit".into())),
    };

    let span_lw = trace.span() / params.linewidth_hz();
    if span_lw < MIN_SPAN_LINEWIDTHS {
        warnings.push(Warning::NarrowSpan { linewidths: span_lw });
    }
    let residual_rms = (sol.cost / trace.freqs.len() as f64).sqrt() / params.a;
    Ok(NotchFit { params, qi, errors, residual_rms, converged: sol.converged, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsq::numeric_jacobian;

    fn trace(p: &NotchParams, span_lw: f64, n: usize) -> S21Trace {
        let span = span_lw * p.linewidth_hz();
        let freqs: Vec<f64> = (0..n).map(|i| p.fr_hz - span / 2.0 + span * i as f64 / (n - 1) as f64).collect();
        let values = freqs.iter().map(|&f| p.s21(f)).collect();
        S21Trace::new(freqs, values).unwrap()
    }

    fn reference() -> NotchParams {
        NotchParams { fr_hz: 6e9, ql: 5e4, qc_mag: 6e4, phi0: 0.1, tau_s: 40e-9, a: 0.8, alpha: 0.3 }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let p = reference();
        let t = trace(&p, 10.0, 60);
        let guess = NotchParams { ql: 4.5e4, phi0: 0.15, ..p };
        let problem = NotchProblem { trace: &t, origin: guess, lw0: guess.linewidth_hz(), phase_scale: 2.0 * PI * t.span() };
        let x = DVector::from_vec(vec![0.3, 0.05, -0.02, 0.12, 0.01, 0.02, 0.25]);
        let a = problem.jacobian(&x);
        let b = numeric_jacobian(|v| problem.residuals(v), &x);
        let scale = a.abs().max();
        assert!((&a - &b).abs().max() < 1e-6 * scale, "{} of {scale}", (&a - &b).abs().max());
    }

    #[test]
    fn noiseless_round_trip() {
        let p = reference();
        let fit = circle_fit(&trace(&p, 10.0, 801)).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(fit.params.fr_hz, p.fr_hz) < 1e-12);
        assert!(rel(fit.params.ql, p.ql) < 1e-9);
        assert!(rel(fit.params.qc_mag, p.qc_mag) < 1e-9);
        assert!(rel(fit.params.phi0, p.phi0) < 1e-9);
        assert!(rel(fit.params.tau_s, p.tau_s) < 1e-9);
        assert!(rel(fit.qi, p.qi()) < 1e-9);
        assert!(fit.residual_rms < 1e-9);
        assert!(fit.qi >= fit.params.ql);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn ideal_phi0_zero() {
        let p = NotchParams { phi0: 0.0, tau_s: 0.0, alpha: 0.0, a: 1.0, ..reference() };
        let fit = circle_fit(&trace(&p, 8.0, 400)).unwrap();
        let expected = 1.0 / fit.params.ql - 1.0 / fit.params.qc_mag;
        assert!((1.0 / fit.qi - expected).abs() < 1e-6 * expected);
        assert!(fit.params.phi0.abs() < 1e-9);
    }

    #[test]
    fn narrow_span_warns() {
        let p = reference();
        let fit = circle_fit(&trace(&p, 2.0, 300)).unwrap();
        assert!(fit.warnings.iter().any(|w| matches!(w, Warning::NarrowSpan { .. })));
    }

    #[test]
    fn flat_trace_fails() {
        let freqs: Vec<f64> = (0..200).map(|i| 6e9 + i as f64 * 1e3).collect();
        let values: Vec<Complex64> = freqs
            .iter()
            .enumerate()
            .map(|(i, _)| Complex64::new(1.0 + 1e-3 * ((i * 7919 % 13) as f64 - 6.0), 1e-3 * ((i * 104_729 % 11) as f64 - 5.0)))
            .collect();
        let t = S21Trace::new(freqs, values).unwrap();
        assert!(matches!(circle_fit(&t), Err(Error::FitFailure(_))));
    }
}
