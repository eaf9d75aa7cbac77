//! `constants`, `design` and `check-tables`.

use anyhow::{Context, Result};
use metkit::design::{design_coupling, layer_sensitivity_chart, met_parameters, JunctionGeometry, ReadoutSettings};
use metkit::io::{fmt_f64, write_chart_csv};
use metkit::loss::DEFAULT_TAN_DELTA_HBN;
use metkit::tables::{self, check_coherence, check_loss_tangents, check_spectra, DEFAULT_RATIO_TOLERANCE, DEFAULT_TAND_TOLERANCE_1E5};

use crate::config::{DesignConfig, TablesConfig};
use crate::report::{Cell, Format, Run, Table};

pub fn constants(format: Format) -> String {
    let mut t = Table::new(&["name", "value", "unit"]);
    for (name, value, unit) in metkit::constants::table() {
        t.push(vec![name.into(), value.into(), unit.into()]);
    }
    match format {
        Format::Csv => t.to_csv(),
        Format::JsonLines => t.to_json_lines("codata-2018"),
    }
}

const DESIGN_COLUMNS: &[&str] = &[
    "name",
    "area_um2",
    "layers",
    "thickness_nm",
    "cj_ff",
    "cg_ff",
    "c_total_ff",
    "ic_na",
    "ej_ghz",
    "ec_ghz",
    "ej_over_ec",
    "f01_asymptotic_ghz",
    "alpha_asymptotic_mhz",
    "f01_exact_ghz",
    "alpha_exact_mhz",
    "participation",
    "resonator_ghz",
    "g_mhz",
    "delta_ghz",
    "chi0_mhz",
    "chi_mhz",
];

pub fn design(run: &mut Run, cfg: &DesignConfig) -> Result<()> {
    cfg.validate()?;
    let calib = cfg.calibration.calibration();
    let template = |area_um2: f64, layers: u32| {
        JunctionGeometry {
            area_um2,
            layers,
            layer_thickness_nm: cfg.barrier.layer_thickness_nm,
            kappa: cfg.barrier.kappa,
        }
        .validated()
    };

    let mut table = Table::new(DESIGN_COLUMNS);
    for d in &cfg.device {
        let geom = template(d.area_um2, d.layers)?;
        let met = met_parameters(&geom, &calib, d.cg_ff).with_context(|| format!("device `{}`", d.name))?;
        let coupling = match d.resonator_ghz {
            Some(fr) => Some(design_coupling(&met, fr, d.zr_ohm).with_context(|| format!("device `{}`", d.name))?),
            None => None,
        };
        run.note(format!(
            "{}: f01 = {:.4} GHz (exact {:.4}), alpha = {:.1} MHz, E_J/E_C = {:.1}, p = {:.1}%",
            d.name,
            met.asymptotic.f01,
            met.exact.f01,
            met.exact.alpha * 1e3,
            met.energies.ratio(),
            met.participation * 100.0
        ));
        table.push(vec![
            d.name.as_str().into(),
            d.area_um2.into(),
            d.layers.into(),
            geom.thickness_nm().into(),
            met.cj_ff.into(),
            met.cg_ff.into(),
            met.c_total_ff.into(),
            met.ic_na.into(),
            met.energies.ej.into(),
            met.energies.ec.into(),
            met.energies.ratio().into(),
            met.asymptotic.f01.into(),
            (met.asymptotic.alpha * 1e3).into(),
            met.exact.f01.into(),
            (met.exact.alpha * 1e3).into(),
            met.participation.into(),
            d.resonator_ghz.into(),
            coupling.map(|c| c.g_mhz).into(),
            coupling.map(|c| c.delta_ghz).into(),
            coupling.map(|c| c.chi0_mhz).into(),
            coupling.map(|c| c.chi_mhz).into(),
        ]);
    }
    let path = run.write_results("design", &table)?;
    run.note(format!("parameters: {}", path.display()));

    match &cfg.chart {
        Some(c) if !c.resonators_ghz.is_empty() => {
            let readout =
                ReadoutSettings { cg_ff: c.cg_ff, zr_ohm: c.zr_ohm, detection_threshold_khz: c.detection_threshold_khz };
            let rows = layer_sensitivity_chart(
                c.layers_min..=c.layers_max,
                &c.resonators_ghz,
                &template(c.area_um2, c.layers_min)?,
                &calib,
                &readout,
            )?;
            let path = run.path("chart.csv");
            run.ensure_out_dir()?;
            write_chart_csv(&path, &rows)?;
            let detectable = rows.iter().filter(|r| r.detectable).count();
            run.note(format!("chart: {} rows, {detectable} above the detection threshold: {}", rows.len(), path.display()));
        }
        Some(_) => run.note("chart omitted: no resonators listed"),
        None => {}
    }
    Ok(())
}

pub fn check_tables(run: &mut Run, cfg: Option<&TablesConfig>) -> Result<()> {
    let (records, hbn) = match cfg {
        Some(c) => (c.qubit.clone(), c.tan_delta_hbn.unwrap_or(DEFAULT_TAN_DELTA_HBN)),
        None => (tables::qubits(), DEFAULT_TAN_DELTA_HBN),
    };
    let tand_tol = run.tolerance.unwrap_or(DEFAULT_TAND_TOLERANCE_1E5);
    let mut rows = check_loss_tangents(&records, hbn, tand_tol)?;
    rows.extend(check_spectra(&records, DEFAULT_RATIO_TOLERANCE)?);
    rows.extend(check_coherence(&records));

    let mut table = Table::new(&["device", "quantity", "computed", "listed", "tolerance", "pass", "note"]);
    for r in &rows {
        run.note(format!(
            "device {} {}: computed {} listed {} (tol {}) {}{}",
            r.device,
            r.quantity,
            fmt_sig(r.computed),
            fmt_f64(r.listed),
            fmt_f64(r.tolerance),
            if r.pass { "PASS" } else { "FAIL" },
            r.note.as_ref().map(|n| format!(" [{n}]")).unwrap_or_default()
        ));
        table.push(vec![
            r.device.into(),
            r.quantity.as_str().into(),
            r.computed.into(),
            r.listed.into(),
            r.tolerance.into(),
            r.pass.into(),
            r.note.clone().map_or(Cell::Empty, Cell::Text),
        ]);
    }
    if rows.is_empty() {
        run.note("no devices to check");
    }
    let path = run.write_results("check_tables", &table)?;
    run.note(format!("report: {}", path.display()));
    Ok(())
}

fn fmt_sig(v: f64) -> String {
    format!("{v:.4}")
}
