use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::lsq::{self, LeastSquares, LmOptions};
use crate::{Error, Result};

/// Excited population versus pulse length and drive frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ChevronGrid {
    pub pulse_lengths_s: Vec<f64>,
    pub drive_freqs_hz: Vec<f64>,
    /// `populations[i][j]` at drive frequency `i` and pulse length `j`.
    pub populations: Vec<Vec<f64>>,
}

impl ChevronGrid {
    pub fn new(pulse_lengths_s: Vec<f64>, drive_freqs_hz: Vec<f64>, populations: Vec<Vec<f64>>) -> Result<Self> {
        if populations.len() != drive_freqs_hz.len()
            || populations.iter().any(|row| row.len() != pulse_lengths_s.len())
        {
            return Err(Error::Domain(format!(
                "chevron grid is not rectangular: expected {} rows of {} values",
                drive_freqs_hz.len(),
                pulse_lengths_s.len()
            )));
        }
        if pulse_lengths_s.len() < 4 || drive_freqs_hz.len() < 3 {
            return Err(Error::InsufficientData("chevron needs >= 4 pulse lengths and >= 3 drive frequencies".into()));
        }
        Ok(Self { pulse_lengths_s, drive_freqs_hz, populations })
    }
}

/// Rabi formula: excited population after a square pulse of length `t_s`.
///
/// `rabi_hz` is the on-resonance Rabi frequency in cycles per second.
pub fn rabi_population(rabi_hz: f64, detuning_hz: f64, t_s: f64) -> f64 {
    let w2 = rabi_hz * rabi_hz + detuning_hz * detuning_hz;
    if w2 == 0.0 {
        return 0.0;
    }
    rabi_hz * rabi_hz / w2 * (PI * w2.sqrt() * t_s).sin().powi(2)
}

/// FWHM in detuning of the time-averaged chevron, Omega^2/(Omega^2 + delta^2).
pub fn chevron_linewidth_hz(rabi_hz: f64) -> f64 {
    2.0 * rabi_hz.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChevronFit {
    pub rabi_hz: f64,
    pub f01_hz: f64,
    pub pi_length_s: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub sigma_rabi_hz: f64,
    pub sigma_f01_hz: f64,
    pub sigma_pi_length_s: f64,
    pub residual_rms: f64,
    pub converged: bool,
}

impl ChevronFit {
    pub fn linewidth_hz(&self) -> f64 {
        chevron_linewidth_hz(self.rabi_hz)
    }
}

/// Works in µs and MHz, with drive frequencies relative to `center`.
struct ChevronProblem<'a> {
    t_us: Vec<f64>,
    d_mhz: Vec<f64>,
    pops: &'a [Vec<f64>],
}

impl ChevronProblem<'_> {
    fn model(x: &DVector<f64>, d: f64, t: f64) -> f64 {
        let omega = x[0];
        let delta = d - x[1];
        let w2 = omega * omega + delta * delta;
        x[3] + x[2] * omega * omega / w2 * (PI * w2.sqrt() * t).sin().powi(2)
    }
}

impl LeastSquares for ChevronProblem<'_> {
    // x = [Omega (MHz), f01 - center (MHz), A, B]
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let nt = self.t_us.len();
        DVector::from_fn(self.d_mhz.len() * nt, |k, _| {
            let (i, j) = (k / nt, k % nt);
            Self::model(x, self.d_mhz[i], self.t_us[j]) - self.pops[i][j]
        })
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let nt = self.t_us.len();
        let (omega, amp) = (x[0], x[2]);
        DMatrix::from_fn(self.d_mhz.len() * nt, 4, |k, c| {
            let (i, j) = (k / nt, k % nt);
            let t = self.t_us[j];
            let delta = self.d_mhz[i] - x[1];
            let w2 = omega * omega + delta * delta;
            let w = w2.sqrt();
            let g = omega * omega / w2;
            let s = (PI * w * t).sin().powi(2);
            let ds_dw = (2.0 * PI * w * t).sin() * PI * t;
            match c {
                0 => amp * (2.0 * omega * delta * delta / (w2 * w2) * s + g * ds_dw * omega / w),
                1 => -amp * (-2.0 * omega * omega * delta / (w2 * w2) * s + g * ds_dw * delta / w),
                2 => g * s,
                _ => 1.0,
            }
        })
    }
}

/// Fits the Rabi chevron with a shared amplitude and offset.
pub fn fit_chevron(grid: &ChevronGrid) -> Result<ChevronFit> {
    let all = grid.populations.iter().flatten();
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-9) {
        return Err(Error::FitFailure("chevron has no contrast".into()));
    }
    let nf = grid.drive_freqs_hz.len();
    let center = 0.5 * (grid.drive_freqs_hz[0] + grid.drive_freqs_hz[nf - 1]);
    let t_us: Vec<f64> = grid.pulse_lengths_s.iter().map(|t| t * 1e6).collect();
    let d_mhz: Vec<f64> = grid.drive_freqs_hz.iter().map(|f| (f - center) * 1e-6).collect();

    // Resonance: the drive frequency with the largest time-averaged population.
    let means: Vec<f64> = grid.populations.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let i_res = super::stats::argmax(&means);
    let f0 = if i_res > 0 && i_res + 1 < nf {
        super::stats::parabolic_vertex(&d_mhz[i_res - 1..=i_res + 1], &means[i_res - 1..=i_res + 1])
    } else {
        d_mhz[i_res]
    };

    // Rabi frequency: scan on the resonant row, amplitude and offset linear.
    let row = &grid.populations[i_res];
    let span = t_us[t_us.len() - 1] - t_us[0];
    let step = t_us.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist = 0.5 / step;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let n_scan = ((nyquist * span) * 16.0).ceil().max(64.0) as usize;
    let yv = DVector::from_column_slice(row);
    for k in 1..=n_scan {
        let omega = nyquist * k as f64 / n_scan as f64;
        let a = DMatrix::from_fn(t_us.len(), 2, |r, c| if c == 0 { (PI * omega * t_us[r]).sin().powi(2) } else { 1.0 });
        if let Some(c) = lsq::linear_lstsq(&a, &yv) {
            let cost = (&a * &c - &yv).norm_squared();
            if cost < best.0 {
                best = (cost, omega, c[0], c[1]);
            }
        }
    }
    let problem = ChevronProblem { t_us, d_mhz, pops: &grid.populations };
    let x0 = DVector::from_vec(vec![best.1, f0, best.2, best.3]);
    let sol = lsq::minimize(&problem, x0, LmOptions::default())?;
    let se = sol.standard_errors().ok_or_else(|| Error::FitFailure("chevron: singular covariance".into()))?;
    let omega = sol.x[0].abs();
    if !(sol.x[2].abs() > 3.0 * se[2]) {
        return Err(Error::FitFailure(format!(
            "chevron has no significant contrast (A = {:.3e} ± {:.1e})",
            sol.x[2], se[2]
        )));
    }
    let rabi_hz = omega * 1e6;
    Ok(ChevronFit {
        rabi_hz,
        f01_hz: center + sol.x[1] * 1e6,
        pi_length_s: 1.0 / (2.0 * rabi_hz),
        amplitude: sol.x[2],
        offset: sol.x[3],
        sigma_rabi_hz: se[0] * 1e6,
        sigma_f01_hz: se[1] * 1e6,
        sigma_pi_length_s: se[0] * 1e6 / (2.0 * rabi_hz * rabi_hz),
        residual_rms: (sol.cost / (grid.populations.len() * grid.pulse_lengths_s.len()) as f64).sqrt(),
        converged: sol.converged,
    })
}
