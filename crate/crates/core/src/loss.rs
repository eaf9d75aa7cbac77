//! Lifetime <-> loss-tangent conversion under the dielectric participation model
//!
//! ```text
//! 1/T1 = 2 pi f01 [p tan(delta) + (1 - p) tan(delta_hBN)] = 2 pi f01 / Q
//! ```
//!
//! and the spin-boson temperature dependence
//!
//! ```text
//! 1/T1(T) = (pi f01 / Q) [1 + coth(h f01 / 2 kB T)]
//! ```
//!
//! which uses the harmonic phase matrix element |<0|phi|1>|^2 = sqrt(2 EC/EJ)
//! so that the T -> 0 limit coincides with the dielectric formula.
//!
//! Frequencies in GHz, lifetimes in us, temperatures in K.

use std::f64::consts::PI;

use crate::constants::{BOLTZMANN, PLANCK};
use crate::{Error, Flagged, Result, Warning};

/// hBN coupling-dielectric loss tangent used when none is supplied.
pub const DEFAULT_TAN_DELTA_HBN: f64 = 5.0e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// Junction participation.
    pub p: f64,
    pub tan_delta: f64,
    pub tan_delta_hbn: f64,
}

impl LossBudget {
    pub fn new(p: f64, tan_delta: f64, tan_delta_hbn: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("participation must lie in [0, 1], got {p}")));
        }
        if !(tan_delta >= 0.0 && tan_delta_hbn >= 0.0) {
            return Err(Error::Domain("loss tangents must be >= 0".into()));
        }
        Ok(Self { p, tan_delta, tan_delta_hbn })
    }

    pub fn total_loss(&self) -> f64 {
        self.p * self.tan_delta + (1.0 - self.p) * self.tan_delta_hbn
    }

    /// Qubit quality factor; infinite for a lossless budget.
    pub fn q_qubit(&self) -> f64 {
        1.0 / self.total_loss()
    }
}

/// A lifetime that may be unbounded (no loss channel at all).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifetime {
    Finite(f64),
    Unbounded,
}

impl Lifetime {
    /// Microseconds; `inf` when unbounded.
    pub fn as_us(&self) -> f64 {
        match self {
            Lifetime::Finite(t) => *t,
            Lifetime::Unbounded => f64::INFINITY,
        }
    }
}

pub fn t1_from_loss(f01_ghz: f64, budget: &LossBudget) -> Result<Lifetime> {
    if !(f01_ghz > 0.0) {
        return Err(Error::Domain(format!("f01 must be positive, got {f01_ghz}")));
    }
    let loss = budget.total_loss();
    if loss == 0.0 {
        return Ok(Lifetime::Unbounded);
    }
    Ok(Lifetime::Finite(1.0 / (2.0 * PI * f01_ghz * 1e9 * loss) * 1e6))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTangent {
    pub value: f64,
    pub sigma: f64,
}

/// Junction loss tangent from a measured T1 (with its standard deviation).
///
/// A negative result is returned with [`Warning::NegativeLossTangent`]: the
/// assumed hBN loss alone would already give a shorter T1.
pub fn tand_from_t1(t1_us: f64, t1_sigma_us: f64, f01_ghz: f64, p: f64, tand_hbn: f64) -> Result<Flagged<LossTangent>> {
    if !(p > 0.0) {
        return Err(Error::NoSensitivity(format!("junction participation is {p}")));
    }
    if !(t1_us > 0.0 && f01_ghz > 0.0) {
        return Err(Error::Domain("T1 and f01 must be positive".into()));
    }
    let rate = 1.0 / (2.0 * PI * f01_ghz * 1e9 * t1_us * 1e-6);
    let value = (rate - (1.0 - p) * tand_hbn) / p;
    // d(tan delta)/dT1 = -rate / (p T1)
    let sigma = rate / p * t1_sigma_us.abs() / t1_us;
    let mut out = Flagged::clean(LossTangent { value, sigma });
    if value < 0.0 {
        out.warnings.push(Warning::NegativeLossTangent { value });
    }
    Ok(out)
}

/// Temperature model of T1 for a qubit of given frequency and quality factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureModel {
    pub f01_ghz: f64,
    pub q_qubit: f64,
}

impl TemperatureModel {
    /// T1 at zero temperature, us.
    pub fn t1_base_us(&self) -> f64 {
        self.q_qubit / (2.0 * PI * self.f01_ghz * 1e9) * 1e6
    }
}

/// h f / 2 kB T.
pub fn thermal_argument(f01_ghz: f64, temp_k: f64) -> f64 {
    PLANCK * f01_ghz * 1e9 / (2.0 * BOLTZMANN * temp_k)
}

/// 1 + coth(h f / 2 kB T); tends to 2 as T -> 0.
pub fn spin_boson_bracket(f01_ghz: f64, temp_k: f64) -> Result<f64> {
    if !(temp_k > 0.0) {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {temp_k}")));
    }
    let x = thermal_argument(f01_ghz, temp_k);
    // 1 + coth x = 2 / (1 - exp(-2x)), stable for large x.
    Ok(2.0 / -(-2.0 * x).exp_m1())
}

pub fn spin_boson_t1(temp_k: f64, model: &TemperatureModel) -> Result<f64> {
    let bracket = spin_boson_bracket(model.f01_ghz, temp_k)?;
    Ok(model.q_qubit / (PI * model.f01_ghz * 1e9 * bracket) * 1e6)
}

/// T1(T) / T1(0).
pub fn retention(f01_ghz: f64, temp_k: f64) -> Result<f64> {
    Ok(2.0 / spin_boson_bracket(f01_ghz, temp_k)?)
}

/// Temperature at which T1 has fallen to `fraction` of its base value.
pub fn retention_temperature(f01_ghz: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    // 2 / (1 + coth x) = fraction  =>  coth x = 2/fraction - 1
    let x = (1.0 / (2.0 / fraction - 1.0)).atanh();
    Ok(PLANCK * f01_ghz * 1e9 / (2.0 * BOLTZMANN * x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonFit {
    pub q_qubit: f64,
    pub sigma: f64,
    /// Observed minus model, us.
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
    pub warnings: Vec<Warning>,
}

impl SpinBosonFit {
    pub fn model(&self, f01_ghz: f64) -> TemperatureModel {
        TemperatureModel { f01_ghz, q_qubit: self.q_qubit }
    }
}

/// Weighted least squares for Q in the spin-boson T1(T).
///
/// The model is linear in Q, so the estimate is closed form. With
/// `sigmas = None` (or any non-positive sigma) the points are weighted
/// uniformly and the error is scaled by the residual variance.
pub fn fit_spin_boson(temps_k: &[f64], t1s_us: &[f64], sigmas_us: Option<&[f64]>, f01_ghz: f64) -> Result<SpinBosonFit> {
    let n = temps_k.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("need >= 3 temperature points, got {n}")));
    }
    if t1s_us.len() != n || sigmas_us.is_some_and(|s| s.len() != n) {
        return Err(Error::Domain("temperature, T1 and sigma lists differ in length".into()));
    }
    let basis = temps_k
        .iter()
        .map(|&t| spin_boson_t1(t, &TemperatureModel { f01_ghz, q_qubit: 1.0 }))
        .collect::<Result<Vec<f64>>>()?;
    let weighted = sigmas_us.filter(|s| s.iter().all(|&v| v > 0.0));
    let weights: Vec<f64> = match weighted {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    let sgg: f64 = basis.iter().zip(&weights).map(|(g, w)| w * g * g).sum();
    let sgt: f64 = basis.iter().zip(&weights).zip(t1s_us).map(|((g, w), t)| w * g * t).sum();
    let q = sgt / sgg;
    let residuals: Vec<f64> = basis.iter().zip(t1s_us).map(|(g, t)| t - q * g).collect();
    let chi2: f64 = residuals.iter().zip(&weights).map(|(r, w)| w * r * r).sum();
    let reduced_chi2 = chi2 / (n - 1) as f64;
    let sigma = if weighted.is_some() { (1.0 / sgg).sqrt() } else { (reduced_chi2 / sgg).sqrt() };

    let mut warnings = Vec::new();
    if weighted.is_some() && reduced_chi2 > 4.0 {
        warnings.push(Warning::LargeResiduals { reduced_chi2 });
    }
    Ok(SpinBosonFit { q_qubit: q, sigma, residuals, reduced_chi2, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_examples() {
        let b = LossBudget::new(0.01, 1.69e-5, 0.0).unwrap();
        let t1 = t1_from_loss(6.0, &b).unwrap().as_us();
        assert!((t1 - 156.957_5).abs() < 1e-3);
        let b = LossBudget::new(0.97, 3.09e-5, 5e-6).unwrap();
        assert!((t1_from_loss(4.76, &b).unwrap().as_us() - 1.11).abs() < 0.005);
        let b = LossBudget::new(0.5, 0.0, 0.0).unwrap();
        assert_eq!(t1_from_loss(5.0, &b).unwrap(), Lifetime::Unbounded);
        assert!(b.q_qubit().is_infinite());
        assert!(LossBudget::new(1.2, 1e-5, 0.0).is_err());
    }

    #[test]
    fn tand_examples() {
        let cases = [(1.11, 4.76, 0.97, 3.09), (1.67, 5.79, 0.96, 1.69), (0.20, 5.15, 0.98, 15.76)];
        for (t1, f, p, expected) in cases {
            let r = tand_from_t1(t1, 0.0, f, p, DEFAULT_TAN_DELTA_HBN).unwrap();
            assert!((r.value.value * 1e5 - expected).abs() < 0.005, "{} vs {expected}", r.value.value * 1e5);
            assert!(r.is_clean());
        }
        assert!(matches!(tand_from_t1(1.0, 0.1, 5.0, 0.0, 5e-6), Err(Error::NoSensitivity(_))));
        // A T1 longer than the hBN loss alone allows.
        let r = tand_from_t1(1e4, 0.0, 5.0, 0.5, 5e-6).unwrap();
        assert!(matches!(r.warnings[..], [Warning::NegativeLossTangent { .. }]));
    }

    #[test]
    fn tand_sigma_matches_first_order() {
        let r = tand_from_t1(1.11, 0.12, 4.76, 0.97, 5e-6).unwrap().value;
        // Finite-difference oracle.
        let h = 1e-6;
        let up = tand_from_t1(1.11 + h, 0.0, 4.76, 0.97, 5e-6).unwrap().value.value;
        let dn = tand_from_t1(1.11 - h, 0.0, 4.76, 0.97, 5e-6).unwrap().value.value;
        let expected = ((up - dn) / (2.0 * h)).abs() * 0.12;
        assert!((r.sigma - expected).abs() < 1e-6 * expected);
        assert!((r.sigma * 1e5 - 0.34).abs() < 0.005);
    }

    #[test]
    fn spin_boson_values() {
        // 15 mK, 4.76 GHz
        assert!((thermal_argument(4.76, 0.015) - 7.614_799).abs() < 1e-5);
        assert!((spin_boson_bracket(4.76, 0.015).unwrap() - 2.0).abs() < 1e-6);
        assert!((spin_boson_bracket(4.76, 0.2).unwrap() - 2.937_331).abs() < 1e-5);
        let m = TemperatureModel { f01_ghz: 4.76, q_qubit: 3.3e4 };
        let ratio = spin_boson_t1(0.2, &m).unwrap() / spin_boson_t1(0.015, &m).unwrap();
        assert!((ratio - 0.680_890).abs() < 1e-5);
        assert!(retention(25.0, 0.4).unwrap() >= 0.95);
        let t50 = retention_temperature(25.0, 0.5).unwrap();
        assert!((t50 - 1.730_96).abs() < 1e-4);
        assert!(spin_boson_t1(0.0, &m).is_err());
    }

    #[test]
    fn zero_temperature_limit_matches_dielectric_formula() {
        let b = LossBudget::new(0.97, 3.09e-5, 5e-6).unwrap();
        let m = TemperatureModel { f01_ghz: 4.76, q_qubit: b.q_qubit() };
        let cold = spin_boson_t1(1e-4, &m).unwrap();
        let dielectric = t1_from_loss(4.76, &b).unwrap().as_us();
        assert!((cold - dielectric).abs() < 1e-12 * dielectric);
        assert!((m.t1_base_us() - dielectric).abs() < 1e-12 * dielectric);
    }

    #[test]
    fn fit_noiseless_and_guards() {
        let m = TemperatureModel { f01_ghz: 4.76, q_qubit: 33_000.0 };
        let temps = [0.015, 0.05, 0.1, 0.15, 0.2];
        let t1s: Vec<f64> = temps.iter().map(|&t| spin_boson_t1(t, &m).unwrap()).collect();
        let sig: Vec<f64> = t1s.iter().map(|t| 0.05 * t).collect();
        let fit = fit_spin_boson(&temps, &t1s, Some(&sig), 4.76).unwrap();
        assert!((fit.q_qubit / m.q_qubit - 1.0).abs() < 1e-10);
        let unweighted = fit_spin_boson(&temps, &t1s, None, 4.76).unwrap();
        assert!((unweighted.q_qubit / m.q_qubit - 1.0).abs() < 1e-10);
        assert!(matches!(
            fit_spin_boson(&temps[..2], &t1s[..2], None, 4.76),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn non_monotone_data_flagged() {
        let temps = [0.02, 0.06, 0.1, 0.14, 0.18, 0.2];
        let t1s = [1.0, 2.0, 0.5, 2.5, 0.4, 3.0];
        let sig = [0.05; 6];
        let fit = fit_spin_boson(&temps, &t1s, Some(&sig), 4.76).unwrap();
        assert!(matches!(fit.warnings[..], [Warning::LargeResiduals { .. }]));
    }
}
