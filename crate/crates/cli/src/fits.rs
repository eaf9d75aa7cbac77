//! `fit-s21`, `extract-tand`, `fit-decay`, `fit-chevron` and `fit-tempdep`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use metkit::io::{self, read_meta, sidecar_path};
use metkit::loss::{fit_spin_boson, spin_boson_t1};
use metkit::resonator::{circle_fit, sweep_batch, TracePair};
use metkit::synth::{DecayModel, RamseyModel};
use metkit::timedomain::{distribution_stats, fit_chevron, fit_echo, fit_ramsey, fit_t1, rabi_population};
use metkit::Warning;

use crate::config::ExtractConfig;
use crate::report::{Cell, Format, Run, Table};

fn warnings_cell(w: &[Warning]) -> Cell {
    if w.is_empty() {
        Cell::Empty
    } else {
        Cell::Text(w.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into())
}

fn display(path: &Path) -> Cell {
    Cell::Text(path.display().to_string())
}

const S21_COLUMNS: &[&str] = &[
    "file",
    "fr_hz",
    "sigma_fr_hz",
    "ql",
    "sigma_ql",
    "qc_mag",
    "sigma_qc_mag",
    "phi0_rad",
    "tau_s",
    "qi",
    "sigma_qi",
    "residual_rms",
    "converged",
    "warnings",
];

pub fn fit_s21(run: &mut Run, files: &[PathBuf]) -> Result<()> {
    let mut table = Table::new(S21_COLUMNS);
    for file in files {
        let mut trace = io::read_s21_csv(file).with_context(|| format!("reading {}", file.display()))?;
        let meta = sidecar_path(file);
        if meta.is_file() {
            let m = read_meta(&meta)?;
            trace = trace.with_conditions(m.power_dbm, m.temperature_k);
        }
        let fit = match circle_fit(&trace) {
            Ok(fit) => fit,
            Err(e) => {
                run.fail(format!("{}: {e}", file.display()));
                continue;
            }
        };
        let p = &fit.params;
        let line = format!(
            "{}: fr = {:.6} GHz, Ql = {:.0}, |Qc| = {:.0}, Qi = {:.0} +- {:.0}",
            file.display(),
            p.fr_hz / 1e9,
            p.ql,
            p.qc_mag,
            fit.qi,
            fit.errors.qi
        );
        if fit.converged {
            run.note(line);
        } else {
            run.fail(format!("{line} (not converged)"));
        }
        for w in &fit.warnings {
            run.note(format!("  warning: {w}"));
        }
        table.push(vec![
            display(file),
            p.fr_hz.into(),
            fit.errors.fr_hz.into(),
            p.ql.into(),
            fit.errors.ql.into(),
            p.qc_mag.into(),
            fit.errors.qc_mag.into(),
            p.phi0.into(),
            p.tau_s.into(),
            fit.qi.into(),
            fit.errors.qi.into(),
            fit.residual_rms.into(),
            fit.converged.into(),
            warnings_cell(&fit.warnings),
        ]);

        let mut plot = Table::new(&["frequency_hz", "re", "im", "model_re", "model_im"]);
        for (f, z) in trace.freqs.iter().zip(&trace.values) {
            let m = p.s21(*f);
            plot.push(vec![(*f).into(), z.re.into(), z.im.into(), m.re.into(), m.im.into()]);
        }
        run.write_plot(&format!("{}_fit.csv", stem(file)), &plot)?;
    }
    let path = run.write_results("s21_fits", &table)?;
    run.note(format!("results: {}", path.display()));
    Ok(())
}

pub fn extract_tand(run: &mut Run, cfg: &ExtractConfig) -> Result<()> {
    let mut pairs = Vec::with_capacity(cfg.pair.len());
    for p in &cfg.pair {
        let mut open = io::read_s21_csv(&p.open).with_context(|| format!("reading {}", p.open.display()))?;
        let mut term = io::read_s21_csv(&p.terminated).with_context(|| format!("reading {}", p.terminated.display()))?;
        let mut pair_id = p.pair_id.clone();
        for (trace, path) in [(&mut open, &p.open), (&mut term, &p.terminated)] {
            let meta_path = sidecar_path(path);
            let meta = if meta_path.is_file() { Some(read_meta(&meta_path)?) } else { None };
            let power = p.power_dbm.or(meta.as_ref().and_then(|m| m.power_dbm));
            let temp = p.temperature_k.or(meta.as_ref().and_then(|m| m.temperature_k));
            *trace = trace.clone().with_conditions(power, temp);
            if pair_id.is_none() {
                pair_id = meta.map(|m| m.pair_id);
            }
        }
        let Some(pair_id) = pair_id else {
            bail!("pair {} / {} has no pair_id in the config or a sidecar", p.open.display(), p.terminated.display());
        };
        pairs.push(TracePair { pair_id, open, terminated: term });
    }

    let rows = sweep_batch(&pairs, cfg.z0_ohm);
    let mut table = Table::new(&[
        "pair_id",
        "power_dbm",
        "temperature_k",
        "f_open_hz",
        "q_open",
        "f_term_hz",
        "q_term",
        "p",
        "tan_delta",
        "sigma_tan_delta",
        "c_load_ff",
        "sigma_p",
        "x_load_ohm",
        "headline",
        "warnings",
    ]);
    for (row, files) in rows.iter().zip(&cfg.pair) {
        match &row.result {
            Ok(x) => {
                run.note(format!(
                    "{} (P = {}, T = {}): p = {:.4}, tan_delta = {:.3e} +- {:.2e}{}",
                    row.pair_id,
                    opt(row.power_dbm, "dBm"),
                    opt(row.temperature_k, "K"),
                    x.p,
                    x.tan_delta,
                    x.sigma_tan_delta,
                    if row.headline { "  <- headline (lowest power)" } else { "" }
                ));
                for w in &x.warnings {
                    run.note(format!("  warning: {w}"));
                }
                table.push(vec![
                    row.pair_id.as_str().into(),
                    row.power_dbm.into(),
                    row.temperature_k.into(),
                    x.f_open_hz.into(),
                    x.q_open.into(),
                    x.f_term_hz.into(),
                    x.q_term.into(),
                    x.p.into(),
                    x.tan_delta.into(),
                    x.sigma_tan_delta.into(),
                    x.c_load_ff.into(),
                    x.sigma_p.into(),
                    x.x_load_ohm.into(),
                    row.headline.into(),
                    warnings_cell(&x.warnings),
                ]);
            }
            Err(e) => run.fail(format!(
                "{} ({} / {}): {e}",
                row.pair_id,
                files.open.display(),
                files.terminated.display(),
            )),
        }
    }
    // The CSV report keeps its fixed schema; JSON lines carry the extra fields.
    let path = match run.format {
        Format::Csv => {
            run.ensure_out_dir()?;
            let path = run.path("extraction.csv");
            io::write_extraction_report(&path, &rows)?;
            path
        }
        Format::JsonLines => run.write_results("extraction", &table)?,
    };
    run.note(format!("report: {}", path.display()));
    Ok(())
}

fn opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v} {unit}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecayKind {
    T1,
    Ramsey,
    Echo,
}

struct DecayResult {
    time: f64,
    sigma: f64,
    amplitude: f64,
    offset: f64,
    detuning: Option<f64>,
    sigma_detuning: Option<f64>,
    rms: f64,
    converged: bool,
    warnings: Vec<Warning>,
    curve: Vec<f64>,
}

/// A single CSV, or every CSV in a directory ordered by the number in its name.
fn decay_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        bail!("{} does not exist", path.display());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    let index = |p: &PathBuf| -> Option<u64> {
        let s = stem(p);
        let digits: String = s.chars().rev().take_while(char::is_ascii_digit).collect();
        digits.chars().rev().collect::<String>().parse().ok()
    };
    files.sort_by(|a, b| index(a).cmp(&index(b)).then_with(|| a.cmp(b)));
    if files.is_empty() {
        bail!("no .csv files in {}", path.display());
    }
    Ok(files)
}

pub fn fit_decay(run: &mut Run, kind: DecayKind, path: &Path) -> Result<()> {
    let files = decay_files(path)?;
    let mut table = Table::new(&[
        "file",
        "kind",
        "time_us",
        "sigma_time_us",
        "amplitude",
        "offset",
        "detuning_hz",
        "sigma_detuning_hz",
        "residual_rms",
        "converged",
        "warnings",
    ]);
    let label = match kind {
        DecayKind::T1 => "T1",
        DecayKind::Ramsey => "T2*",
        DecayKind::Echo => "T2E",
    };
    let mut times = Vec::new();
    for file in &files {
        let trace = io::read_decay_csv(file).with_context(|| format!("reading {}", file.display()))?;
        let fitted = match kind {
            DecayKind::T1 | DecayKind::Echo => {
                let fit = if kind == DecayKind::T1 { fit_t1(&trace) } else { fit_echo(&trace) };
                fit.map(|f| {
                    let model = DecayModel { time_us: f.time_us, amplitude: f.amplitude, offset: f.offset };
                    DecayResult {
                        time: f.time_us,
                        sigma: f.sigma_time_us,
                        amplitude: f.amplitude,
                        offset: f.offset,
                        detuning: None,
                        sigma_detuning: None,
                        rms: f.residual_rms,
                        converged: f.converged,
                        curve: trace.delays_s.iter().map(|&t| model.eval(t)).collect(),
                        warnings: f.warnings,
                    }
                })
            }
            DecayKind::Ramsey => fit_ramsey(&trace).map(|f| {
                let curve = if f.oscillating {
                    let model = RamseyModel {
                        t2_star_us: f.t2_star_us,
                        detuning_hz: f.detuning_hz,
                        phase: f.phase,
                        amplitude: f.amplitude,
                        offset: f.offset,
                    };
                    trace.delays_s.iter().map(|&t| model.eval(t)).collect()
                } else {
                    let model = DecayModel { time_us: f.t2_star_us, amplitude: f.amplitude, offset: f.offset };
                    trace.delays_s.iter().map(|&t| model.eval(t)).collect()
                };
                DecayResult {
                    time: f.t2_star_us,
                    sigma: f.sigma_t2_star_us,
                    amplitude: f.amplitude,
                    offset: f.offset,
                    detuning: Some(f.detuning_hz),
                    sigma_detuning: Some(f.sigma_detuning_hz),
                    rms: f.residual_rms,
                    converged: f.converged,
                    curve,
                    warnings: f.warnings,
                }
            }),
        };
        let r = match fitted {
            Ok(v) => v,
            Err(e) => {
                run.fail(format!("{}: {e}", file.display()));
                continue;
            }
        };
        let (time, sigma, converged, warnings) = (r.time, r.sigma, r.converged, &r.warnings);
        let line = format!("{}: {label} = {time:.4} +- {sigma:.4} us", file.display());
        if converged {
            times.push(time);
            if files.len() == 1 {
                run.note(line);
            }
        } else {
            run.fail(format!("{line} (not converged)"));
        }
        if files.len() == 1 {
            for w in warnings {
                run.note(format!("  warning: {w}"));
            }
            let mut plot = Table::new(&["delay_s", "p_excited", "model"]);
            for ((t, y), m) in trace.delays_s.iter().zip(&trace.populations).zip(&r.curve) {
                plot.push(vec![(*t).into(), (*y).into(), (*m).into()]);
            }
            run.write_plot(&format!("{}_fit.csv", stem(file)), &plot)?;
        }
        table.push(vec![
            display(file),
            label.into(),
            time.into(),
            sigma.into(),
            r.amplitude.into(),
            r.offset.into(),
            r.detuning.into(),
            r.sigma_detuning.into(),
            r.rms.into(),
            converged.into(),
            warnings_cell(warnings),
        ]);
    }

    if files.len() > 1 {
        run.note(format!("{} of {} traces fitted", times.len(), files.len()));
        match distribution_stats(&times) {
            Ok(d) => {
                run.note(format!(
                    "{label} distribution ({:?}): mean = {:.4} us, std = {:.4} us, best = {:.4} us, sample mean = {:.4} us, sample std = {:.4} us",
                    d.method, d.mean, d.std_dev, d.best, d.sample_mean, d.sample_std
                ));
                let mut hist = Table::new(&["bin_center_us", "count"]);
                for (c, n) in &d.histogram {
                    hist.push(vec![(*c).into(), (*n).into()]);
                }
                run.write_plot("histogram.csv", &hist)?;
            }
            Err(e) => run.note(format!("no distribution: {e}")),
        }
    }
    let path = run.write_results("decay_fits", &table)?;
    run.note(format!("results: {}", path.display()));
    Ok(())
}

pub fn fit_chevron_cmd(run: &mut Run, file: &Path) -> Result<()> {
    let grid = io::read_chevron_csv(file).with_context(|| format!("reading {}", file.display()))?;
    let mut table = Table::new(&[
        "file",
        "rabi_hz",
        "sigma_rabi_hz",
        "f01_hz",
        "sigma_f01_hz",
        "pi_length_s",
        "sigma_pi_length_s",
        "amplitude",
        "offset",
        "residual_rms",
        "converged",
    ]);
    match fit_chevron(&grid) {
        Ok(f) => {
            let line = format!(
                "{}: Rabi = {:.4} MHz, f01 = {:.6} GHz, pi pulse = {:.2} ns",
                file.display(),
                f.rabi_hz / 1e6,
                f.f01_hz / 1e9,
                f.pi_length_s * 1e9
            );
            if f.converged {
                run.note(line);
            } else {
                run.fail(format!("{line} (not converged)"));
            }
            table.push(vec![
                display(file),
                f.rabi_hz.into(),
                f.sigma_rabi_hz.into(),
                f.f01_hz.into(),
                f.sigma_f01_hz.into(),
                f.pi_length_s.into(),
                f.sigma_pi_length_s.into(),
                f.amplitude.into(),
                f.offset.into(),
                f.residual_rms.into(),
                f.converged.into(),
            ]);
            let mut plot = Table::new(&["pulse_length_s", "drive_freq_hz", "p_excited", "model"]);
            for (i, fd) in grid.drive_freqs_hz.iter().enumerate() {
                for (j, t) in grid.pulse_lengths_s.iter().enumerate() {
                    let m = f.offset + f.amplitude * rabi_population(f.rabi_hz, fd - f.f01_hz, *t);
                    plot.push(vec![(*t).into(), (*fd).into(), grid.populations[i][j].into(), m.into()]);
                }
            }
            run.write_plot(&format!("{}_fit.csv", stem(file)), &plot)?;
        }
        Err(e) => run.fail(format!("{}: {e}", file.display())),
    }
    let path = run.write_results("chevron_fit", &table)?;
    run.note(format!("results: {}", path.display()));
    Ok(())
}

pub fn fit_tempdep(run: &mut Run, file: &Path, f01_ghz: f64) -> Result<()> {
    if !(f01_ghz > 0.0 && f01_ghz.is_finite()) {
        bail!("--f01-ghz must be positive, got {f01_ghz}");
    }
    let data = io::read_tempdep_csv(file).with_context(|| format!("reading {}", file.display()))?;
    let t1_us: Vec<f64> = data.t1_s.iter().map(|v| v * 1e6).collect();
    let err_us: Vec<f64> = data.t1_err_s.iter().map(|v| v * 1e6).collect();
    let weighted = err_us.iter().all(|&e| e > 0.0);
    let mut table =
        Table::new(&["file", "f01_ghz", "q_qubit", "sigma_q_qubit", "t1_base_us", "reduced_chi2", "weighted", "warnings"]);
    match fit_spin_boson(&data.temps_k, &t1_us, weighted.then_some(err_us.as_slice()), f01_ghz) {
        Ok(fit) => {
            let model = fit.model(f01_ghz);
            run.note(format!(
                "{}: Q = {:.4e} +- {:.2e}, T1(0) = {:.4} us, reduced chi2 = {:.3}",
                file.display(),
                fit.q_qubit,
                fit.sigma,
                model.t1_base_us(),
                fit.reduced_chi2
            ));
            for w in &fit.warnings {
                run.note(format!("  warning: {w}"));
            }
            table.push(vec![
                display(file),
                f01_ghz.into(),
                fit.q_qubit.into(),
                fit.sigma.into(),
                model.t1_base_us().into(),
                fit.reduced_chi2.into(),
                weighted.into(),
                warnings_cell(&fit.warnings),
            ]);
            let mut plot = Table::new(&["temperature_k", "t1_s", "t1_err_s", "model_t1_s"]);
            for i in 0..data.temps_k.len() {
                let m = spin_boson_t1(data.temps_k[i], &model)? * 1e-6;
                plot.push(vec![data.temps_k[i].into(), data.t1_s[i].into(), data.t1_err_s[i].into(), m.into()]);
            }
            run.write_plot(&format!("{}_fit.csv", stem(file)), &plot)?;
        }
        Err(e) => run.fail(format!("{}: {e}", file.display())),
    }
    let path = run.write_results("tempdep_fit", &table)?;
    run.note(format!("results: {}", path.display()));
    Ok(())
}
