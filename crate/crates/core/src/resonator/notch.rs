use std::f64::consts::PI;

use num_complex::Complex64;

/// Parameters of the notch (hanger) resonator model
///
/// ```text
/// S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi0} / (1 + 2 i Ql (f/fr - 1))]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchParams {
    pub fr_hz: f64,
    pub ql: f64,
    pub qc_mag: f64,
    /// Impedance-mismatch rotation, rad.
    pub phi0: f64,
    /// Cable delay, s.
    pub tau_s: f64,
    pub a: f64,
    /// Global phase, rad.
    pub alpha: f64,
}

impl NotchParams {
    /// Internal quality factor from 1/Qi = 1/Ql - cos(phi0)/|Qc|.
    pub fn qi(&self) -> f64 {
        1.0 / self.inverse_qi()
    }

    pub fn inverse_qi(&self) -> f64 {
        1.0 / self.ql - self.phi0.cos() / self.qc_mag
    }

    /// Loaded Q for a given internal Q and the coupling of `self`.
    pub fn loaded_q(qi: f64, qc_mag: f64, phi0: f64) -> f64 {
        1.0 / (1.0 / qi + phi0.cos() / qc_mag)
    }

    pub fn linewidth_hz(&self) -> f64 {
        self.fr_hz / self.ql
    }

    pub fn s21(&self, f: f64) -> Complex64 {
        let env = Complex64::from_polar(self.a, self.alpha - 2.0 * PI * f * self.tau_s);
        env * self.resonance(f)
    }

    /// The bracketed resonator response without the environment factor.
    pub fn resonance(&self, f: f64) -> Complex64 {
        let x = f / self.fr_hz - 1.0;
        let k = Complex64::from_polar(self.ql / self.qc_mag, self.phi0);
        Complex64::new(1.0, 0.0) - k / Complex64::new(1.0, 2.0 * self.ql * x)
    }
}
