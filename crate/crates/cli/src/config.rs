//! TOML run configurations. Every numeric key carries its unit as a suffix
//! and unknown keys are rejected, so `area = 20` fails instead of silently
//! defaulting.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use metkit::design::{IcCalibration, DEFAULT_DETECTION_THRESHOLD_KHZ, DEFAULT_KAPPA, DEFAULT_LAYER_THICKNESS_NM};
use metkit::tables::QubitRecord;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::report::resolve;

/// Parsed config and its directory, against which relative paths resolve.
pub struct Loaded<T> {
    pub value: T,
    pub dir: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value = toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        match line {
            Some(line) => anyhow::anyhow!("{}: line {line}: {}", path.display(), e.message()),
            None => anyhow::anyhow!("{}: {}", path.display(), e.message()),
        }
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { value, dir })
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(v > 0.0 && v.is_finite(), "`{name}` must be positive and finite, got {v}");
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    ensure!(v >= 0.0 && v.is_finite(), "`{name}` must be >= 0 and finite, got {v}");
    Ok(())
}

fn existing(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = resolve(base, p);
    ensure!(full.is_file(), "referenced file {} does not exist", full.display());
    Ok(full)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub anchor_layers: u32,
    pub anchor_area_um2: f64,
    pub anchor_f01_ghz: f64,
    pub decades_per_nm: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let c = IcCalibration::default();
        Self {
            anchor_layers: c.anchor_layers,
            anchor_area_um2: c.anchor_area_um2,
            anchor_f01_ghz: c.anchor_f01_ghz,
            decades_per_nm: c.decades_per_nm,
        }
    }
}

impl CalibrationConfig {
    pub fn calibration(&self) -> IcCalibration {
        IcCalibration {
            anchor_layers: self.anchor_layers,
            anchor_area_um2: self.anchor_area_um2,
            anchor_f01_ghz: self.anchor_f01_ghz,
            decades_per_nm: self.decades_per_nm,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    pub layer_thickness_nm: f64,
    pub kappa: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self { layer_thickness_nm: DEFAULT_LAYER_THICKNESS_NM, kappa: DEFAULT_KAPPA }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    pub area_um2: f64,
    pub layers: u32,
    #[serde(default)]
    pub cg_ff: f64,
    /// Readout resonator for the coupling report.
    pub resonator_ghz: Option<f64>,
    #[serde(default = "default_z0")]
    pub zr_ohm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub area_um2: f64,
    pub layers_min: u32,
    pub layers_max: u32,
    #[serde(default)]
    pub resonators_ghz: Vec<f64>,
    #[serde(default)]
    pub cg_ff: f64,
    #[serde(default = "default_z0")]
    pub zr_ohm: f64,
    #[serde(default = "default_threshold")]
    pub detection_threshold_khz: f64,
}

fn default_z0() -> f64 {
    50.0
}

fn default_threshold() -> f64 {
    DEFAULT_DETECTION_THRESHOLD_KHZ
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub device: Vec<DeviceConfig>,
    pub chart: Option<ChartConfig>,
}

impl Default for DesignConfig {
    /// The calibration anchor junction alone.
    fn default() -> Self {
        let c = IcCalibration::default();
        Self {
            calibration: CalibrationConfig::default(),
            barrier: BarrierConfig::default(),
            device: vec![DeviceConfig {
                name: "anchor".into(),
                area_um2: c.anchor_area_um2,
                layers: c.anchor_layers,
                cg_ff: 0.0,
                resonator_ghz: None,
                zr_ohm: 50.0,
            }],
            chart: None,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        positive("barrier.layer_thickness_nm", self.barrier.layer_thickness_nm)?;
        positive("barrier.kappa", self.barrier.kappa)?;
        for d in &self.device {
            positive(&format!("device `{}` area_um2", d.name), d.area_um2)?;
            ensure!(d.layers > 0, "device `{}` needs layers >= 1", d.name);
            non_negative(&format!("device `{}` cg_ff", d.name), d.cg_ff)?;
            positive(&format!("device `{}` zr_ohm", d.name), d.zr_ohm)?;
            if let Some(f) = d.resonator_ghz {
                positive(&format!("device `{}` resonator_ghz", d.name), f)?;
            }
        }
        if let Some(c) = &self.chart {
            positive("chart.area_um2", c.area_um2)?;
            ensure!(
                c.layers_min >= 1 && c.layers_min <= c.layers_max,
                "chart layer range {}..={} is empty or starts at 0",
                c.layers_min,
                c.layers_max
            );
            for &f in &c.resonators_ghz {
                positive("chart.resonators_ghz", f)?;
            }
            non_negative("chart.cg_ff", c.cg_ff)?;
            positive("chart.zr_ohm", c.zr_ohm)?;
            positive("chart.detection_threshold_khz", c.detection_threshold_khz)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    /// Substrate loss tangent (dimensionless).
    pub tan_delta_hbn: Option<f64>,
    #[serde(default)]
    pub qubit: Vec<QubitRecord>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub open: PathBuf,
    pub terminated: PathBuf,
    pub pair_id: Option<String>,
    pub power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
    #[serde(default)]
    pub pair: Vec<PairConfig>,
}

impl ExtractConfig {
    /// Checks units and resolves every file against `base`.
    pub fn resolved(mut self, base: &Path) -> Result<Self> {
        positive("z0_ohm", self.z0_ohm)?;
        for p in &mut self.pair {
            p.open = existing(base, &p.open)?;
            p.terminated = existing(base, &p.terminated)?;
            if let Some(t) = p.temperature_k {
                non_negative("temperature_k", t)?;
            }
        }
        Ok(self)
    }
}

fn default_snr() -> f64 {
    f64::INFINITY
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S21Synth {
    pub fr_hz: f64,
    pub ql: f64,
    pub qc_mag: f64,
    #[serde(default)]
    pub phi0_rad: f64,
    #[serde(default)]
    pub tau_s: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub alpha_rad: f64,
    pub span_hz: f64,
    pub n_points: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySynth {
    pub time_us: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    pub span_us: f64,
    pub n_points: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    /// More than one writes a directory of index-named files.
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySynth {
    pub t2_star_us: f64,
    pub detuning_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    pub span_us: f64,
    pub n_points: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChevronSynth {
    pub rabi_hz: f64,
    pub f01_hz: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    pub max_length_s: f64,
    pub n_lengths: usize,
    pub detuning_span_hz: f64,
    pub n_freqs: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempdepSynth {
    pub f01_ghz: f64,
    pub q_qubit: f64,
    pub temperatures_k: Vec<f64>,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSynth {
    /// Exactly one of `p` and `c_load_ff`.
    pub p: Option<f64>,
    pub c_load_ff: Option<f64>,
    pub tan_delta: f64,
    pub q_open: f64,
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
    pub f_open_hz: f64,
    pub qc_mag: f64,
    #[serde(default)]
    pub phi0_rad: f64,
    #[serde(default)]
    pub tau_s: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub alpha_rad: f64,
    pub span_linewidths: f64,
    pub n_points: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_pair_id")]
    pub pair_id: String,
    pub power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
}

fn default_pair_id() -> String {
    "pair".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub s21: Option<S21Synth>,
    pub t1: Option<DecaySynth>,
    pub echo: Option<DecaySynth>,
    pub ramsey: Option<RamseySynth>,
    pub chevron: Option<ChevronSynth>,
    pub tempdep: Option<TempdepSynth>,
    pub pair: Option<PairSynth>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let sections = [
            self.s21.is_some(),
            self.t1.is_some(),
            self.echo.is_some(),
            self.ramsey.is_some(),
            self.chevron.is_some(),
            self.tempdep.is_some(),
            self.pair.is_some(),
        ];
        if !sections.iter().any(|&s| s) {
            bail!("synth config has no [s21], [t1], [echo], [ramsey], [chevron], [tempdep] or [pair] section");
        }
        if let Some(s) = &self.s21 {
            positive("s21.fr_hz", s.fr_hz)?;
            positive("s21.span_hz", s.span_hz)?;
        }
        for d in [&self.t1, &self.echo].into_iter().flatten() {
            positive("time_us", d.time_us)?;
            positive("span_us", d.span_us)?;
            ensure!(d.repetitions >= 1, "repetitions must be >= 1");
        }
        if let Some(r) = &self.ramsey {
            positive("ramsey.t2_star_us", r.t2_star_us)?;
            positive("ramsey.span_us", r.span_us)?;
            ensure!(r.repetitions >= 1, "repetitions must be >= 1");
        }
        if let Some(c) = &self.chevron {
            positive("chevron.max_length_s", c.max_length_s)?;
            positive("chevron.detuning_span_hz", c.detuning_span_hz)?;
        }
        if let Some(t) = &self.tempdep {
            positive("tempdep.f01_ghz", t.f01_ghz)?;
            positive("tempdep.q_qubit", t.q_qubit)?;
        }
        if let Some(p) = &self.pair {
            ensure!(p.p.is_some() != p.c_load_ff.is_some(), "[pair] needs exactly one of `p` and `c_load_ff`");
            positive("pair.f_open_hz", p.f_open_hz)?;
            positive("pair.q_open", p.q_open)?;
            positive("pair.z0_ohm", p.z0_ohm)?;
            positive("pair.span_linewidths", p.span_linewidths)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_suffix_required() {
        let err = toml::from_str::<DesignConfig>("[[device]]\nname = \"a\"\narea = 20\nlayers = 17\n").unwrap_err();
        assert!(err.message().contains("unknown field `area`"), "{}", err.message());
        let ok: DesignConfig = toml::from_str("[[device]]\nname = \"a\"\narea_um2 = 20\nlayers = 17\n").unwrap();
        assert_eq!(ok.device[0].zr_ohm, 50.0);
        ok.validate().unwrap();
    }

    #[test]
    fn missing_manifest_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: ExtractConfig = toml::from_str("[[pair]]\nopen = \"o.csv\"\nterminated = \"t.csv\"\n").unwrap();
        let err = cfg.resolved(dir.path()).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
