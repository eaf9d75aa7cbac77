//! Capacitively terminated quarter-wave resonator compared with an open-ended
//! reference of the same geometry.

use std::f64::consts::PI;

use super::NotchFit;
use crate::{Error, Flagged, Result, Warning};

/// Below this participation the loss tangent is not constrained by the data.
const MIN_PARTICIPATION: f64 = 1e-12;

/// Resonance of the terminated resonator for a load capacitance `c_ff` (fF).
///
/// Solves f = (f_open/pi) * theta(f), theta = arctan(Z0/X(f)) taken in (pi/2, pi),
/// with X(f) = -1/(2 pi f C). The result lies in (f_open/2, f_open].
pub fn terminated_frequency(c_ff: f64, z0_ohm: f64, f_open_hz: f64) -> Result<f64> {
    if !(c_ff >= 0.0) || !(z0_ohm > 0.0) || !(f_open_hz > 0.0) {
        return Err(Error::Domain(format!(
            "need c_load >= 0, z0 > 0, f_open > 0 (got {c_ff} fF, {z0_ohm} ohm, {f_open_hz} Hz)"
        )));
    }
    if c_ff == 0.0 {
        return Ok(f_open_hz);
    }
    if c_ff.is_infinite() {
        return Ok(f_open_hz / 2.0);
    }
    let k = 2.0 * PI * c_ff * 1e-15 * z0_ohm;
    // g is strictly increasing on the bracket and changes sign across it.
    let g = |f: f64| f - f_open_hz + f_open_hz / PI * (k * f).atan();
    let (mut lo, mut hi) = (f_open_hz / 2.0, f_open_hz);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * f_open_hz {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Electric participation of the termination, p = |sin phi| / (phi + |sin phi|)
/// with phi = 2 pi f_term / f_open.
pub fn participation_from_freqs(f_term_hz: f64, f_open_hz: f64) -> Result<f64> {
    if !(f_term_hz > 0.0 && f_term_hz <= f_open_hz) {
        return Err(Error::Domain(format!(
            "need 0 < f_term <= f_open (got {f_term_hz} Hz, {f_open_hz} Hz)"
        )));
    }
    // sin(2 pi) and sin(pi) are not exactly zero in floating point.
    if f_term_hz == f_open_hz || 2.0 * f_term_hz == f_open_hz {
        return Ok(0.0);
    }
    let phi = 2.0 * PI * f_term_hz / f_open_hz;
    let s = phi.sin().abs();
    Ok(s / (phi + s))
}

/// Largest participation on the capacitive branch, reached where tan(phi) = phi.
pub fn max_participation() -> (f64, f64) {
    let mut phi: f64 = 4.5;
    for _ in 0..50 {
        // Newton on tan(phi) - phi, equivalently sin - phi cos.
        let g = phi.sin() - phi * phi.cos();
        let dg = phi * phi.sin();
        phi -= g / dg;
    }
    let s = phi.sin().abs();
    (phi, s / (phi + s))
}

fn participation_slope(phi: f64) -> f64 {
    let s = phi.sin().abs();
    let ds = phi.sin().signum() * phi.cos();
    (ds * phi - s) / (phi + s).powi(2)
}

/// Inverts 1/Q_term = 2 p tan(delta) + (1 - p)/Q_open.
pub fn tand_from_q(q_term: f64, q_open: f64, p: f64) -> Result<Flagged<f64>> {
    if !(p > MIN_PARTICIPATION) {
        return Err(Error::NoSensitivity(format!(
            "termination participation {p:e} is too small to constrain the loss tangent"
        )));
    }
    if !(q_term > 0.0 && q_open > 0.0) {
        return Err(Error::Domain(format!("quality factors must be positive (got {q_term}, {q_open})")));
    }
    let value = (1.0 / q_term - (1.0 - p) / q_open) / (2.0 * p);
    let mut out = Flagged::clean(value);
    if value < 0.0 {
        out.warnings.push(Warning::NegativeLossTangent { value });
    }
    Ok(out)
}

/// Forward relation: internal Q of the terminated resonator.
pub fn q_term_from_loss(p: f64, tan_delta: f64, q_open: f64) -> f64 {
    1.0 / (2.0 * p * tan_delta + (1.0 - p) / q_open)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadReactance {
    pub x_ohm: f64,
    pub c_ff: f64,
}

/// Load reactance and capacitance implied by the frequency shift.
pub fn load_reactance_from_shift(f_term_hz: f64, f_open_hz: f64, z0_ohm: f64) -> Result<LoadReactance> {
    if !(f_term_hz > f_open_hz / 2.0 && f_term_hz < f_open_hz) {
        return Err(Error::Branch(format!(
            "f_term = {f_term_hz} Hz is outside the capacitive window ({}, {}) Hz",
            f_open_hz / 2.0,
            f_open_hz
        )));
    }
    let x = z0_ohm / (PI * f_term_hz / f_open_hz).tan();
    let c = -1.0 / (2.0 * PI * f_term_hz * x);
    Ok(LoadReactance { x_ohm: x, c_ff: c * 1e15 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminatedExtraction {
    pub f_open_hz: f64,
    pub q_open: f64,
    pub f_term_hz: f64,
    pub q_term: f64,
    /// 2 pi f_term / f_open, rad.
    pub phi: f64,
    pub p: f64,
    pub sigma_p: f64,
    pub tan_delta: f64,
    pub sigma_tan_delta: f64,
    pub x_load_ohm: f64,
    pub c_load_ff: f64,
    /// Warnings from both fits and from the inversion.
    pub warnings: Vec<Warning>,
}

/// Loss tangent of the termination from a terminated fit and its open reference.
///
/// The standard errors of f_open, Q_open, f_term and Q_term are propagated to
/// first order, treating the four as uncorrelated.
pub fn extract(terminated: &NotchFit, reference: &NotchFit, z0_ohm: f64) -> Result<TerminatedExtraction> {
    let (fo, qo) = (reference.params.fr_hz, reference.qi);
    let (ft, qt) = (terminated.params.fr_hz, terminated.qi);
    if ft == fo {
        return Err(Error::NoSensitivity("terminated and open resonances coincide (p = 0)".into()));
    }
    let load = load_reactance_from_shift(ft, fo, z0_ohm)?;
    let p = participation_from_freqs(ft, fo)?;
    let phi = 2.0 * PI * ft / fo;
    let tand = tand_from_q(qt, qo, p)?;
    let t = tand.value;

    let dp_dphi = participation_slope(phi);
    let dp_dft = dp_dphi * 2.0 * PI / fo;
    let dp_dfo = -dp_dphi * 2.0 * PI * ft / (fo * fo);
    let dt_dp = 1.0 / (2.0 * p * qo) - t / p;
    let dt_dqt = -1.0 / (2.0 * p * qt * qt);
    let dt_dqo = (1.0 - p) / (2.0 * p * qo * qo);

    let (sft, sfo) = (terminated.errors.fr_hz, reference.errors.fr_hz);
    let (sqt, sqo) = (terminated.errors.qi, reference.errors.qi);
    let sigma_p = (dp_dft * sft).hypot(dp_dfo * sfo);
    let sigma_t = [dt_dp * dp_dft * sft, dt_dp * dp_dfo * sfo, dt_dqt * sqt, dt_dqo * sqo]
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();

    let mut warnings: Vec<Warning> = reference.warnings.iter().chain(&terminated.warnings).cloned().collect();
    warnings.extend(tand.warnings);
    Ok(TerminatedExtraction {
        f_open_hz: fo,
        q_open: qo,
        f_term_hz: ft,
        q_term: qt,
        phi,
        p,
        sigma_p,
        tan_delta: t,
        sigma_tan_delta: sigma_t,
        x_load_ohm: load.x_ohm,
        c_load_ff: load.c_ff,
        warnings,
    })
}
