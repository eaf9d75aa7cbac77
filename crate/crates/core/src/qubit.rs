//! Transmon energy scales and spectra.
//!
//! All energies are in frequency units (E/h) expressed in GHz.
//!
//! Two routes to the spectrum are kept side by side: the asymptotic transmon
//! relations (`f01 = sqrt(8 EJ EC) - EC`, `alpha = -EC`) used for design, and
//! exact diagonalization of the Cooper-pair-box Hamiltonian in the charge basis
//!
//! ```text
//! H(n, n')  = 4 EC (n - ng)^2 delta(n, n') - (EJ / 2) delta(n, n' +- 1)
//! ```
//!
//! truncated to `n in [-n_max, n_max]`. The matrix is symmetric tridiagonal,
//! so the lowest levels are found by Sturm-sequence bisection.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::constants::{ELEMENTARY_CHARGE, FLUX_QUANTUM, PLANCK};
use crate::lsq::{self, LeastSquares, LmOptions};
use crate::{Error, Flagged, Result, Warning};

/// Default charge-basis half-width.
pub const DEFAULT_N_MAX: usize = 30;
/// Largest shift in f01 (GHz) tolerated when the basis is doubled.
pub const CONVERGENCE_TOL_GHZ: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 5;

/// Josephson and charging energies, GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPair {
    pub ej: f64,
    pub ec: f64,
}

impl EnergyPair {
    pub fn new(ej: f64, ec: f64) -> Result<Self> {
        if !(ej >= 0.0 && ej.is_finite()) {
            return Err(Error::Domain(format!("E_J must be finite and >= 0, got {ej}")));
        }
        if !(ec > 0.0 && ec.is_finite()) {
            return Err(Error::Domain(format!("E_C must be finite and > 0, got {ec}")));
        }
        Ok(Self { ej, ec })
    }

    pub fn ratio(&self) -> f64 {
        self.ej / self.ec
    }
}

/// Lowest transitions of a transmon, GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmonSpectrum {
    pub f01: f64,
    pub f12: f64,
    /// f12 - f01; negative for a transmon.
    pub alpha: f64,
    /// |f01(ng = 1/2) - f01(ng = 0)|. `None` for the asymptotic model.
    pub charge_dispersion_01: Option<f64>,
    pub ng: f64,
    /// Basis half-width actually used (0 for the asymptotic model).
    pub n_max: usize,
    pub warnings: Vec<Warning>,
}

impl TransmonSpectrum {
    pub fn f02(&self) -> f64 {
        self.f01 + self.f12
    }
}

/// Flux bias in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPoint(pub f64);

/// E_C = e^2 / 2 C_total, in GHz, for a capacitance in fF.
pub fn charging_energy(c_total_ff: f64) -> Result<f64> {
    if !(c_total_ff > 0.0) {
        return Err(Error::Domain(format!("capacitance must be > 0 fF, got {c_total_ff}")));
    }
    let c = c_total_ff * 1e-15;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c * PLANCK) * 1e-9)
}

/// E_J = Phi0 I_c / 2 pi, in GHz, for a critical current in nA.
pub fn josephson_energy(ic_na: f64) -> Result<f64> {
    if !(ic_na >= 0.0) {
        return Err(Error::Domain(format!("critical current must be >= 0 nA, got {ic_na}")));
    }
    Ok(FLUX_QUANTUM * ic_na * 1e-9 / (2.0 * PI * PLANCK) * 1e-9)
}

/// Inverse of [`josephson_energy`]: critical current in nA.
pub fn critical_current_for(ej_ghz: f64) -> f64 {
    ej_ghz / josephson_energy(1.0).expect("1 nA is valid")
}

/// Leading-order transmon relations.
pub fn asymptotic_spectrum(e: &EnergyPair) -> TransmonSpectrum {
    let f01 = (8.0 * e.ej * e.ec).sqrt() - e.ec;
    TransmonSpectrum {
        f01,
        f12: f01 - e.ec,
        alpha: -e.ec,
        charge_dispersion_01: None,
        ng: 0.0,
        n_max: 0,
        warnings: Vec::new(),
    }
}

/// Lowest `count` eigenvalues (ascending, GHz) of the charge-basis Hamiltonian
/// at a fixed basis size.
pub fn charge_basis_levels(e: &EnergyPair, ng: f64, n_max: usize, count: usize) -> Vec<f64> {
    let diag: Vec<f64> = (-(n_max as i64)..=n_max as i64)
        .map(|n| 4.0 * e.ec * (n as f64 - ng).powi(2))
        .collect();
    let off = -0.5 * e.ej;
    (0..count.min(diag.len())).map(|k| kth_eigenvalue(&diag, off, k)).collect()
}

/// Exact spectrum from charge-basis diagonalization.
///
/// Starts at `n_max` and doubles the basis until f01 moves by less than
/// [`CONVERGENCE_TOL_GHZ`]; a [`Warning::NotConverged`] is attached if that
/// never happens. The charge dispersion of the 0-1 transition is filled in.
pub fn exact_spectrum(e: &EnergyPair, ng: f64, n_max: usize) -> Result<TransmonSpectrum> {
    if n_max < 10 {
        return Err(Error::Domain(format!("n_max must be >= 10, got {n_max}")));
    }
    let (levels, used, warnings) = converged_levels(e, ng, n_max);
    let f01 = levels[1] - levels[0];
    let f12 = levels[2] - levels[1];

    let (other, _, _) = converged_levels(e, ng + 0.5, used);
    let dispersion = (f01 - (other[1] - other[0])).abs();

    Ok(TransmonSpectrum {
        f01,
        f12,
        alpha: f12 - f01,
        charge_dispersion_01: Some(dispersion),
        ng,
        n_max: used,
        warnings,
    })
}

/// [`exact_spectrum`] with the default basis.
pub fn exact_spectrum_default(e: &EnergyPair, ng: f64) -> TransmonSpectrum {
    exact_spectrum(e, ng, DEFAULT_N_MAX).expect("default basis is valid")
}

fn converged_levels(e: &EnergyPair, ng: f64, n_max: usize) -> (Vec<f64>, usize, Vec<Warning>) {
    let mut n = n_max;
    let mut levels = charge_basis_levels(e, ng, n, 3);
    let mut shift = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let bigger = charge_basis_levels(e, ng, 2 * n, 3);
        shift = ((bigger[1] - bigger[0]) - (levels[1] - levels[0])).abs();
        n *= 2;
        levels = bigger;
        if shift < CONVERGENCE_TOL_GHZ {
            return (levels, n, Vec::new());
        }
    }
    (levels, n, vec![Warning::NotConverged { n_max: n, shift_ghz: shift }])
}

/// Peak-to-peak ng dispersion of one energy level (0, 1 or 2), GHz.
///
/// Below E_J/E_C = 5 a [`Warning::LowRatio`] is attached.
pub fn charge_dispersion(e: &EnergyPair, level: usize) -> Result<Flagged<f64>> {
    if level > 2 {
        return Err(Error::Domain(format!("level must be 0, 1 or 2, got {level}")));
    }
    let (at_zero, used, mut warnings) = converged_levels(e, 0.0, DEFAULT_N_MAX);
    let (at_half, _, w) = converged_levels(e, 0.5, used);
    warnings.extend(w);
    if e.ratio() < 5.0 {
        warnings.push(Warning::LowRatio { ratio: e.ratio() });
    }
    Ok(Flagged { value: (at_half[level] - at_zero[level]).abs(), warnings })
}

/// Energies recovered from a measured spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedSpectrum {
    pub energies: EnergyPair,
    pub ratio: f64,
}

/// Inverts the asymptotic relations: E_C = -alpha, E_J = (f01 + E_C)^2 / 8 E_C.
pub fn invert_spectrum(f01: f64, alpha: f64) -> Result<InvertedSpectrum> {
    if !(alpha < 0.0) {
        return Err(Error::Domain(format!("anharmonicity must be negative, got {alpha}")));
    }
    if !(f01 > 0.0) {
        return Err(Error::Domain(format!("f01 must be positive, got {f01}")));
    }
    let ec = -alpha;
    let ej = (f01 + ec).powi(2) / (8.0 * ec);
    Ok(InvertedSpectrum { energies: EnergyPair { ej, ec }, ratio: ej / ec })
}

/// Inverts the charge-basis spectrum at ng = 1/4, where charge dispersion
/// averages out to first order, starting from the asymptotic solution.
pub fn invert_spectrum_exact(f01: f64, alpha: f64) -> Result<InvertedSpectrum> {
    struct Problem {
        f01: f64,
        alpha: f64,
    }
    impl LeastSquares for Problem {
        fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
            let e = EnergyPair { ej: x[0].exp(), ec: x[1].exp() };
            let s = exact_spectrum_default(&e, 0.25);
            DVector::from_vec(vec![s.f01 - self.f01, s.alpha - self.alpha])
        }
    }
    let start = invert_spectrum(f01, alpha)?.energies;
    let sol = lsq::minimize(
        &Problem { f01, alpha },
        DVector::from_vec(vec![start.ej.ln(), start.ec.ln()]),
        LmOptions::default(),
    )?;
    if sol.cost.sqrt() > 1e-9 * f01 {
        return Err(Error::FitFailure(format!(
            "no charge-basis transmon reproduces f01 = {f01} GHz, alpha = {alpha} GHz"
        )));
    }
    let energies = EnergyPair { ej: sol.x[0].exp(), ec: sol.x[1].exp() };
    Ok(InvertedSpectrum { energies, ratio: energies.ratio() })
}

/// Josephson energy of a symmetric two-junction SQUID at a flux bias.
pub fn squid_ej(ej_sum: f64, phi: FluxPoint) -> Result<f64> {
    if !(ej_sum >= 0.0) {
        return Err(Error::Domain(format!("E_J sum must be >= 0, got {ej_sum}")));
    }
    Ok(ej_sum * (PI * phi.0).cos().abs())
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + off.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
fn kth_eigenvalue(diag: &[f64], off: f64, k: usize) -> f64 {
    let radius = 2.0 * off.abs();
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - radius;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + radius;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
