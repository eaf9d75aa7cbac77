//! Published device parameters and the consistency checks run against them.

use serde::{Deserialize, Serialize};

use crate::loss::{tand_from_t1, DEFAULT_TAN_DELTA_HBN};
use crate::qubit::{invert_spectrum, invert_spectrum_exact};
use crate::Result;

/// Default tolerance on loss tangents, in units of 1e-5 (table rounding).
pub const DEFAULT_TAND_TOLERANCE_1E5: f64 = 0.02;
/// Default tolerance on E_J/E_C.
pub const DEFAULT_RATIO_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitRecord {
    pub device: u32,
    pub area_um2: f64,
    pub cg_ff: f64,
    /// Junction participation, fraction.
    pub p: f64,
    pub f01_ghz: f64,
    pub alpha_mhz: f64,
    pub ej_over_ec: f64,
    #[serde(default)]
    pub t1_mean_us: Option<f64>,
    #[serde(default)]
    pub t1_std_us: Option<f64>,
    #[serde(default)]
    pub t1_best_us: Option<f64>,
    #[serde(default)]
    pub t2e_mean_us: Option<f64>,
    /// Listed loss tangent, units of 1e-5.
    pub tan_delta_1e5: f64,
    #[serde(default)]
    pub tan_delta_sigma_1e5: Option<f64>,
}

impl QubitRecord {
    /// The T1 the listed loss tangent was derived from: the mean when
    /// available, otherwise the best value.
    pub fn t1_for_loss(&self) -> Option<(f64, f64, bool)> {
        match (self.t1_mean_us, self.t1_best_us) {
            (Some(m), _) => Some((m, self.t1_std_us.unwrap_or(0.0), false)),
            (None, Some(b)) => Some((b, 0.0, true)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitorRecord {
    pub device: u32,
    pub area_um2: f64,
    pub thickness_nm: f64,
    pub volume_um3: f64,
    pub p: f64,
    pub f_ghz: f64,
    pub tan_delta_1e5: f64,
    pub tan_delta_sigma_1e5: f64,
}

#[allow(clippy::too_many_arguments)]
fn q(
    device: u32,
    area_um2: f64,
    cg_ff: f64,
    p: f64,
    f01_ghz: f64,
    alpha_mhz: f64,
    ej_over_ec: f64,
    t1: (Option<f64>, Option<f64>, Option<f64>),
    t2e_mean_us: Option<f64>,
    tand: (f64, Option<f64>),
) -> QubitRecord {
    QubitRecord {
        device,
        area_um2,
        cg_ff,
        p,
        f01_ghz,
        alpha_mhz,
        ej_over_ec,
        t1_mean_us: t1.0,
        t1_std_us: t1.1,
        t1_best_us: t1.2,
        t2e_mean_us,
        tan_delta_1e5: tand.0,
        tan_delta_sigma_1e5: tand.1,
    }
}

/// Qubit devices 1-4.
pub fn qubits() -> Vec<QubitRecord> {
    vec![
        q(1, 20.0, 4.0, 0.97, 4.76, -174.0, 101.0, (Some(1.11), Some(0.12), Some(1.39)), Some(1.26), (3.09, Some(0.34))),
        q(2, 8.0, 2.4, 0.96, 5.79, -618.0, 14.0, (Some(1.67), Some(0.27), Some(2.46)), Some(3.29), (1.69, Some(0.28))),
        q(3, 24.0, 12.0, 0.91, 5.29, -100.0, 45.0, (Some(0.27), Some(0.05), Some(0.38)), Some(0.29), (12.20, Some(2.27))),
        q(4, 20.0, 3.0, 0.98, 5.15, -242.0, 66.0, (None, None, Some(0.20)), None, (15.76, None)),
    ]
}

/// Parallel-plate capacitor devices 5-8.
pub fn capacitors() -> Vec<CapacitorRecord> {
    let c = |device, area_um2, thickness_nm, volume_um3, p, f_ghz, tand, sigma| CapacitorRecord {
        device,
        area_um2,
        thickness_nm,
        volume_um3,
        p,
        f_ghz,
        tan_delta_1e5: tand,
        tan_delta_sigma_1e5: sigma,
    };
    vec![
        c(5, 200.0, 30.0, 6.00, 0.16, 5.88, 3.31, 0.61),
        c(6, 303.0, 24.0, 7.27, 0.18, 4.39, 5.60, 0.17),
        c(7, 309.0, 28.0, 8.65, 0.18, 6.83, 9.08, 1.48),
        c(8, 65.0, 33.0, 2.15, 0.12, 6.35, 14.02, 3.85),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub device: u32,
    pub quantity: String,
    pub computed: f64,
    pub listed: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl CheckRow {
    fn new(device: u32, quantity: &str, computed: f64, listed: f64, tolerance: f64) -> Self {
        Self {
            device,
            quantity: quantity.to_string(),
            computed,
            listed,
            tolerance,
            pass: (computed - listed).abs() <= tolerance,
            note: None,
        }
    }
}

/// Junction loss tangent from T1 (and its sigma from the T1 spread), in 1e-5.
pub fn check_loss_tangents(records: &[QubitRecord], tand_hbn: f64, tolerance_1e5: f64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for r in records {
        let Some((t1, t1_std, from_best)) = r.t1_for_loss() else { continue };
        let tand = tand_from_t1(t1, t1_std, r.f01_ghz, r.p, tand_hbn)?;
        let mut row = CheckRow::new(r.device, "tan_delta_1e5", tand.value.value * 1e5, r.tan_delta_1e5, tolerance_1e5);
        if from_best {
            row.note = Some(format!("from best T1 = {t1} us (no mean listed)"));
        }
        rows.push(row);
        if let Some(listed) = r.tan_delta_sigma_1e5 {
            rows.push(CheckRow::new(r.device, "tan_delta_sigma_1e5", tand.value.sigma * 1e5, listed, tolerance_1e5));
        }
    }
    Ok(rows)
}

/// E_J/E_C from (f01, alpha) via the asymptotic relations; the charge-basis
/// inversion is given in the note for comparison.
pub fn check_spectra(records: &[QubitRecord], tolerance: f64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for r in records {
        let alpha = r.alpha_mhz / 1e3;
        let asym = invert_spectrum(r.f01_ghz, alpha)?;
        let mut row = CheckRow::new(r.device, "ej_over_ec", asym.ratio, r.ej_over_ec, tolerance);
        let exact = invert_spectrum_exact(r.f01_ghz, alpha).map(|e| format!("{:.1}", e.ratio)).unwrap_or_else(|e| e.to_string());
        row.note = Some(if row.pass {
            format!("charge-basis inversion gives {exact}")
        } else {
            format!(
                "listed value inconsistent with f01 = sqrt(8 EjEc) - Ec and alpha = -Ec (charge-basis inversion gives {exact})"
            )
        });
        rows.push(row);
    }
    Ok(rows)
}

/// T2E <= 2 T1 for devices with both means listed; `computed` is T2E/(2 T1).
pub fn check_coherence(records: &[QubitRecord]) -> Vec<CheckRow> {
    records
        .iter()
        .filter_map(|r| {
            let (t1, t2e) = (r.t1_mean_us?, r.t2e_mean_us?);
            let ratio = t2e / (2.0 * t1);
            Some(CheckRow {
                device: r.device,
                quantity: "t2e_over_2t1".into(),
                computed: ratio,
                listed: 1.0,
                tolerance: 0.0,
                pass: ratio <= 1.0,
                note: Some("bound, not an equality".into()),
            })
        })
        .collect()
}

/// All checks with default tolerances.
pub fn check_all(records: &[QubitRecord]) -> Result<Vec<CheckRow>> {
    let mut rows = check_loss_tangents(records, DEFAULT_TAN_DELTA_HBN, DEFAULT_TAND_TOLERANCE_1E5)?;
    rows.extend(check_spectra(records, DEFAULT_RATIO_TOLERANCE)?);
    rows.extend(check_coherence(records));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_rows_pass() {
        let rows = check_loss_tangents(&qubits(), DEFAULT_TAN_DELTA_HBN, DEFAULT_TAND_TOLERANCE_1E5).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|r| r.pass), "{rows:#?}");
        assert!(rows.iter().find(|r| r.device == 4).unwrap().note.is_some());
    }

    #[test]
    fn spectrum_rows_flag_inconsistent_devices() {
        let rows = check_spectra(&qubits(), DEFAULT_RATIO_TOLERANCE).unwrap();
        let pass: Vec<bool> = rows.iter().map(|r| r.pass).collect();
        assert_eq!(pass, [true, true, false, false]);
        assert!((rows[2].computed - 363.15).abs() < 0.01);
        assert!(rows[2].note.as_ref().unwrap().contains("inconsistent"));
    }

    #[test]
    fn coherence_bound() {
        let rows = check_coherence(&qubits());
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.pass));
    }

    #[test]
    fn empty_input() {
        assert!(check_all(&[]).unwrap().is_empty());
    }
}
