//! Junction geometry to qubit parameters, readout coupling and the layer-count
//! sensitivity chart.
//!
//! Units: areas in um^2, thicknesses in nm, capacitances in fF, currents in nA,
//! qubit energies/frequencies in GHz, couplings and shifts in MHz.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use crate::constants::{ELEMENTARY_CHARGE, PLANCK, VACUUM_PERMITTIVITY};
use crate::qubit::{self, EnergyPair, TransmonSpectrum};
use crate::{Error, Result};

pub const DEFAULT_LAYER_THICKNESS_NM: f64 = 0.65;
/// Relative permittivity of the WSe2 barrier.
pub const DEFAULT_KAPPA: f64 = 7.8;
pub const DEFAULT_DETECTION_THRESHOLD_KHZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionGeometry {
    pub area_um2: f64,
    /// Number of barrier atomic layers.
    pub layers: u32,
    pub layer_thickness_nm: f64,
    pub kappa: f64,
}

impl JunctionGeometry {
    pub fn new(area_um2: f64, layers: u32) -> Result<Self> {
        Self { area_um2, layers, layer_thickness_nm: DEFAULT_LAYER_THICKNESS_NM, kappa: DEFAULT_KAPPA }
            .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.area_um2 >= 0.0 && self.area_um2.is_finite()) {
            return Err(Error::Domain(format!("junction area must be >= 0, got {}", self.area_um2)));
        }
        if self.layers == 0 {
            return Err(Error::Domain("barrier needs at least one layer".into()));
        }
        if !(self.layer_thickness_nm > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::Domain("layer thickness and kappa must be positive".into()));
        }
        Ok(self)
    }

    pub fn thickness_nm(&self) -> f64 {
        self.layers as f64 * self.layer_thickness_nm
    }

    pub fn with_layers(self, layers: u32) -> Self {
        Self { layers, ..self }
    }

    pub fn with_area(self, area_um2: f64) -> Self {
        Self { area_um2, ..self }
    }
}

/// Empirical critical-current-density model: log10 J_c falls linearly with
/// barrier thickness, and the overall scale is fixed by requiring the anchor
/// junction (at `anchor_layers`, `anchor_area_um2`, no external capacitance)
/// to land on `anchor_f01_ghz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcCalibration {
    pub anchor_layers: u32,
    pub anchor_area_um2: f64,
    pub anchor_f01_ghz: f64,
    pub decades_per_nm: f64,
}

impl Default for IcCalibration {
    fn default() -> Self {
        Self { anchor_layers: 17, anchor_area_um2: 20.0, anchor_f01_ghz: 6.0, decades_per_nm: 0.6 }
    }
}

impl IcCalibration {
    fn check(&self) -> Result<()> {
        if self.anchor_layers == 0 || !(self.anchor_area_um2 > 0.0) || !(self.anchor_f01_ghz > 0.0) {
            return Err(Error::Config("I_c calibration has no valid anchor junction".into()));
        }
        if !(self.decades_per_nm >= 0.0 && self.decades_per_nm.is_finite()) {
            return Err(Error::Config(format!(
                "calibration slope must be >= 0 decades/nm, got {}",
                self.decades_per_nm
            )));
        }
        Ok(())
    }

    /// Critical current of the anchor junction, nA.
    fn anchor_current(&self, template: &JunctionGeometry) -> Result<f64> {
        let anchor = template.with_layers(self.anchor_layers).with_area(self.anchor_area_um2);
        let ec = qubit::charging_energy(junction_capacitance(&anchor))?;
        let f = self.anchor_f01_ghz;
        let ej = (f + ec).powi(2) / (8.0 * ec);
        Ok(qubit::critical_current_for(ej))
    }
}

/// Parallel-plate capacitance kappa eps0 A / t, fF.
pub fn junction_capacitance(geom: &JunctionGeometry) -> f64 {
    let area = geom.area_um2 * 1e-12;
    let t = geom.thickness_nm() * 1e-9;
    geom.kappa * VACUUM_PERMITTIVITY * area / t * 1e15
}

/// Fraction of the qubit capacitance in the junction, C_J / (C_J + C_g).
pub fn participation(cj_ff: f64, cg_ff: f64) -> Result<f64> {
    if !(cj_ff >= 0.0 && cg_ff >= 0.0) {
        return Err(Error::Domain("capacitances must be >= 0".into()));
    }
    if cj_ff + cg_ff == 0.0 {
        return Err(Error::Domain("total capacitance is zero".into()));
    }
    Ok(cj_ff / (cj_ff + cg_ff))
}

/// Critical current from geometry and calibration, nA.
pub fn critical_current(geom: &JunctionGeometry, calib: &IcCalibration) -> Result<f64> {
    calib.check()?;
    let anchor_ic = calib.anchor_current(geom)?;
    let anchor_t = calib.anchor_layers as f64 * geom.layer_thickness_nm;
    let density_ratio = 10f64.powf(-calib.decades_per_nm * (geom.thickness_nm() - anchor_t));
    Ok(anchor_ic * density_ratio * geom.area_um2 / calib.anchor_area_um2)
}

/// Derived parameters of a merged-element transmon.
#[derive(Debug, Clone, PartialEq)]
pub struct MetParameters {
    pub cj_ff: f64,
    pub cg_ff: f64,
    pub c_total_ff: f64,
    pub ic_na: f64,
    pub energies: EnergyPair,
    /// Asymptotic spectrum (alpha = -E_C).
    pub asymptotic: TransmonSpectrum,
    /// Charge-basis spectrum at ng = 0.
    pub exact: TransmonSpectrum,
    pub participation: f64,
}

pub fn met_parameters(geom: &JunctionGeometry, calib: &IcCalibration, cg_ff: f64) -> Result<MetParameters> {
    let geom = geom.validated()?;
    if !(cg_ff >= 0.0) {
        return Err(Error::Domain(format!("C_g must be >= 0, got {cg_ff}")));
    }
    let cj = junction_capacitance(&geom);
    let c_total = cj + cg_ff;
    let ic = critical_current(&geom, calib)?;
    let energies = EnergyPair::new(qubit::josephson_energy(ic)?, qubit::charging_energy(c_total)?)?;
    Ok(MetParameters {
        cj_ff: cj,
        cg_ff,
        c_total_ff: c_total,
        ic_na: ic,
        energies,
        asymptotic: qubit::asymptotic_spectrum(&energies),
        exact: qubit::exact_spectrum_default(&energies, 0.0),
        participation: participation(cj, cg_ff)?,
    })
}

/// Qubit-resonator coupling g/h in MHz.
///
/// The half-wave resonator is replaced by its lumped equivalent
/// C_r = pi / (2 omega_r Z_r); the qubit charge matrix element is the
/// transmon value n01 = (E_J / 32 E_C)^(1/4).
pub fn coupling_g(cg_ff: f64, c_total_ff: f64, fr_ghz: f64, zr_ohm: f64, e: &EnergyPair) -> Result<f64> {
    if !(cg_ff >= 0.0 && c_total_ff > 0.0 && fr_ghz > 0.0 && zr_ohm > 0.0) {
        return Err(Error::Domain("coupling inputs must be positive".into()));
    }
    let fr = fr_ghz * 1e9;
    let cr = PI / (2.0 * (2.0 * PI * fr) * zr_ohm);
    let v_zpf = (PLANCK * fr / (2.0 * cr)).sqrt();
    let n01 = (e.ej / (32.0 * e.ec)).powf(0.25);
    let g_hz = (cg_ff / c_total_ff) * (2.0 * ELEMENTARY_CHARGE * v_zpf / PLANCK) * n01;
    Ok(g_hz * 1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveShifts {
    /// Lamb shift g^2 / Delta, MHz.
    pub chi0_mhz: f64,
    /// Dispersive shift (g^2 / Delta) alpha / (Delta + alpha), MHz.
    pub chi_mhz: f64,
}

pub fn dispersive_shifts(g_mhz: f64, delta_ghz: f64, alpha_ghz: f64) -> Result<DispersiveShifts> {
    if delta_ghz == 0.0 || delta_ghz + alpha_ghz == 0.0 {
        return Err(Error::StraddlingResonance(format!(
            "Delta = {delta_ghz} GHz, Delta + alpha = {} GHz",
            delta_ghz + alpha_ghz
        )));
    }
    let delta_mhz = delta_ghz * 1e3;
    let chi0 = g_mhz * g_mhz / delta_mhz;
    Ok(DispersiveShifts { chi0_mhz: chi0, chi_mhz: chi0 * alpha_ghz / (delta_ghz + alpha_ghz) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDesign {
    pub cg_ff: f64,
    pub fr_ghz: f64,
    pub zr_ohm: f64,
    pub g_mhz: f64,
    /// f01 - f_r, GHz.
    pub delta_ghz: f64,
    pub chi0_mhz: f64,
    pub chi_mhz: f64,
}

/// Coupling of a designed MET to one readout resonator, using the exact f01
/// and anharmonicity.
pub fn design_coupling(met: &MetParameters, fr_ghz: f64, zr_ohm: f64) -> Result<CouplingDesign> {
    let g = coupling_g(met.cg_ff, met.c_total_ff, fr_ghz, zr_ohm, &met.energies)?;
    let delta = met.exact.f01 - fr_ghz;
    let shifts = dispersive_shifts(g, delta, met.exact.alpha)?;
    Ok(CouplingDesign {
        cg_ff: met.cg_ff,
        fr_ghz,
        zr_ohm,
        g_mhz: g,
        delta_ghz: delta,
        chi0_mhz: shifts.chi0_mhz,
        chi_mhz: shifts.chi_mhz,
    })
}

/// Readout settings shared by every row of the sensitivity chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutSettings {
    pub cg_ff: f64,
    pub zr_ohm: f64,
    pub detection_threshold_khz: f64,
}

impl Default for ReadoutSettings {
    fn default() -> Self {
        Self { cg_ff: 4.0, zr_ohm: 50.0, detection_threshold_khz: DEFAULT_DETECTION_THRESHOLD_KHZ }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartRow {
    pub layers: u32,
    pub f01_ghz: f64,
    /// Nearest readout resonator.
    pub fr_ghz: f64,
    pub delta_ghz: f64,
    pub chi0_mhz: f64,
    pub chi_mhz: f64,
    pub detectable: bool,
    /// f01 one layer thinner / thicker (the typical layer-count uncertainty).
    pub f01_one_layer_thinner_ghz: Option<f64>,
    pub f01_one_layer_thicker_ghz: Option<f64>,
}

pub const CHART_HEADER: &str = "layers,f01_ghz,fr_ghz,delta_ghz,chi0_mhz,chi_mhz,detectable";

impl ChartRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.layers, self.f01_ghz, self.fr_ghz, self.delta_ghz, self.chi0_mhz, self.chi_mhz, self.detectable
        )
    }
}

/// f01 and dispersive shifts versus barrier layer count against a fixed set of
/// readout resonators.
pub fn layer_sensitivity_chart(
    layers: RangeInclusive<u32>,
    resonators_ghz: &[f64],
    template: &JunctionGeometry,
    calib: &IcCalibration,
    readout: &ReadoutSettings,
) -> Result<Vec<ChartRow>> {
    if resonators_ghz.is_empty() {
        return Ok(Vec::new());
    }
    let f01_at = |n: u32| -> Result<Option<f64>> {
        if n == 0 {
            return Ok(None);
        }
        Ok(Some(met_parameters(&template.with_layers(n), calib, readout.cg_ff)?.exact.f01))
    };
    layers
        .map(|n| {
            let met = met_parameters(&template.with_layers(n), calib, readout.cg_ff)?;
            let f01 = met.exact.f01;
            let fr = resonators_ghz
                .iter()
                .cloned()
                .min_by(|a, b| (a - f01).abs().total_cmp(&(b - f01).abs()))
                .expect("non-empty");
            let (chi0, chi) = match design_coupling(&met, fr, readout.zr_ohm) {
                Ok(c) => (c.chi0_mhz, c.chi_mhz),
                Err(Error::StraddlingResonance(_)) => (f64::NAN, f64::NAN),
                Err(e) => return Err(e),
            };
            Ok(ChartRow {
                layers: n,
                f01_ghz: f01,
                fr_ghz: fr,
                delta_ghz: f01 - fr,
                chi0_mhz: chi0,
                chi_mhz: chi,
                detectable: chi.abs() * 1e3 >= readout.detection_threshold_khz,
                f01_one_layer_thinner_ghz: f01_at(n - 1)?,
                f01_one_layer_thicker_ghz: f01_at(n + 1)?,
            })
        })
        .collect()
}
