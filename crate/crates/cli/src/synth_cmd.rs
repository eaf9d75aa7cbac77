//! `synth`: seeded synthetic data in the same formats the fit commands read.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use metkit::io::{self, fmt_f64, Role, S21Meta, TempDepData};
use metkit::loss::TemperatureModel;
use metkit::resonator::NotchParams;
use metkit::synth::{
    gen_chevron, gen_decay, gen_ramsey, gen_s21, gen_temperature_sweep, gen_terminated_pair, ChevronModel, DecayModel,
    LoadSpec, NoiseSpec, PairSpec, RamseyModel,
};
use metkit::timedomain::DecayTrace;

use crate::config::{DecaySynth, SynthConfig};
use crate::report::{Cell, Run, Table};

// Each section draws from its own stream: seed + (section << 32) + repetition.
const S21_STREAM: u64 = 0;
const T1_STREAM: u64 = 1;
const ECHO_STREAM: u64 = 2;
const RAMSEY_STREAM: u64 = 3;
const CHEVRON_STREAM: u64 = 4;
const TEMPDEP_STREAM: u64 = 5;
const PAIR_STREAM: u64 = 6;

fn noise(run: &Run, snr_db: f64, stream: u64, rep: usize) -> NoiseSpec {
    NoiseSpec::new(snr_db, run.seed.wrapping_add(stream << 32).wrapping_add(rep as u64))
}

fn linspace(stop: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| stop * i as f64 / (n.max(2) - 1) as f64).collect()
}

fn kv(pairs: &[(&str, f64)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect::<Vec<_>>().join(";")
}

struct Manifest {
    table: Table,
}

impl Manifest {
    fn add(&mut self, file: &Path, kind: &str, noise: &NoiseSpec, truth: String) {
        self.table.push(vec![
            file.display().to_string().into(),
            kind.into(),
            noise.seed.into(),
            noise.snr_db.into(),
            truth.into(),
        ]);
    }
}

/// One file, or `<name>/<name>_NNN.csv` for several repetitions.
fn decay_paths(run: &Run, name: &str, reps: usize) -> Result<Vec<PathBuf>> {
    if reps == 1 {
        return Ok(vec![run.path(&format!("{name}.csv"))]);
    }
    let dir = run.path(name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok((0..reps).map(|i| dir.join(format!("{name}_{i:03}.csv"))).collect())
}

#[allow(clippy::too_many_arguments)]
fn write_decays(
    run: &Run,
    manifest: &mut Manifest,
    name: &str,
    reps: usize,
    snr_db: f64,
    stream: u64,
    truth: String,
    make: impl Fn(&NoiseSpec) -> metkit::Result<DecayTrace>,
) -> Result<()> {
    for (i, path) in decay_paths(run, name, reps)?.into_iter().enumerate() {
        let n = noise(run, snr_db, stream, i);
        io::write_decay_csv(&path, &make(&n)?)?;
        manifest.add(&path, name, &n, truth.clone());
    }
    Ok(())
}

fn decay(run: &Run, manifest: &mut Manifest, name: &str, stream: u64, d: &DecaySynth) -> Result<()> {
    let model = DecayModel { time_us: d.time_us, amplitude: d.amplitude, offset: d.offset };
    let delays = linspace(d.span_us * 1e-6, d.n_points);
    let truth = kv(&[("time_us", d.time_us), ("amplitude", d.amplitude), ("offset", d.offset)]);
    write_decays(run, manifest, name, d.repetitions, d.snr_db, stream, truth, |n| gen_decay(&model, &delays, n))
}

pub fn synth(run: &mut Run, cfg: &SynthConfig) -> Result<()> {
    cfg.validate()?;
    run.ensure_out_dir()?;
    let mut manifest = Manifest { table: Table::new(&["file", "kind", "seed", "snr_db", "truth"]) };

    if let Some(s) = &cfg.s21 {
        let params = NotchParams {
            fr_hz: s.fr_hz,
            ql: s.ql,
            qc_mag: s.qc_mag,
            phi0: s.phi0_rad,
            tau_s: s.tau_s,
            a: s.amplitude,
            alpha: s.alpha_rad,
        };
        let n = noise(run, s.snr_db, S21_STREAM, 0);
        let path = run.path("s21.csv");
        io::write_s21_csv(&path, &gen_s21(&params, s.span_hz, s.n_points, &n)?)?;
        let truth = kv(&[("fr_hz", s.fr_hz), ("ql", s.ql), ("qc_mag", s.qc_mag), ("qi", params.qi())]);
        manifest.add(&path, "s21", &n, truth);
    }
    if let Some(d) = &cfg.t1 {
        decay(run, &mut manifest, "t1", T1_STREAM, d)?;
    }
    if let Some(d) = &cfg.echo {
        decay(run, &mut manifest, "echo", ECHO_STREAM, d)?;
    }
    if let Some(r) = &cfg.ramsey {
        let model = RamseyModel {
            t2_star_us: r.t2_star_us,
            detuning_hz: r.detuning_hz,
            phase: r.phase_rad,
            amplitude: r.amplitude,
            offset: r.offset,
        };
        let delays = linspace(r.span_us * 1e-6, r.n_points);
        let truth = kv(&[("t2_star_us", r.t2_star_us), ("detuning_hz", r.detuning_hz)]);
        write_decays(run, &mut manifest, "ramsey", r.repetitions, r.snr_db, RAMSEY_STREAM, truth, |n| {
            gen_ramsey(&model, &delays, n)
        })?;
    }
    if let Some(c) = &cfg.chevron {
        let model = ChevronModel { rabi_hz: c.rabi_hz, f01_hz: c.f01_hz, amplitude: c.amplitude, offset: c.offset };
        let lengths = linspace(c.max_length_s, c.n_lengths);
        let freqs: Vec<f64> = linspace(c.detuning_span_hz, c.n_freqs)
            .into_iter()
            .map(|d| c.f01_hz - c.detuning_span_hz / 2.0 + d)
            .collect();
        let n = noise(run, c.snr_db, CHEVRON_STREAM, 0);
        let path = run.path("chevron.csv");
        io::write_chevron_csv(&path, &gen_chevron(&model, &lengths, &freqs, &n)?)?;
        manifest.add(&path, "chevron", &n, kv(&[("rabi_hz", c.rabi_hz), ("f01_hz", c.f01_hz)]));
    }
    if let Some(t) = &cfg.tempdep {
        let model = TemperatureModel { f01_ghz: t.f01_ghz, q_qubit: t.q_qubit };
        let n = noise(run, t.snr_db, TEMPDEP_STREAM, 0);
        let sweep = gen_temperature_sweep(&model, &t.temperatures_k, &n)?;
        let data = TempDepData {
            temps_k: sweep.temps_k,
            t1_s: sweep.t1_us.iter().map(|v| v * 1e-6).collect(),
            t1_err_s: sweep.sigma_us.iter().map(|v| v * 1e-6).collect(),
        };
        let path = run.path("tempdep.csv");
        io::write_tempdep_csv(&path, &data)?;
        manifest.add(&path, "tempdep", &n, kv(&[("f01_ghz", t.f01_ghz), ("q_qubit", t.q_qubit)]));
    }
    if let Some(p) = &cfg.pair {
        let spec = PairSpec {
            load: match (p.p, p.c_load_ff) {
                (Some(p), _) => LoadSpec::Participation(p),
                (None, Some(c)) => LoadSpec::CapacitanceFf(c),
                (None, None) => unreachable!("validated"),
            },
            tan_delta: p.tan_delta,
            q_open: p.q_open,
            z0_ohm: p.z0_ohm,
            f_open_hz: p.f_open_hz,
            template: NotchParams {
                fr_hz: p.f_open_hz,
                ql: p.q_open,
                qc_mag: p.qc_mag,
                phi0: p.phi0_rad,
                tau_s: p.tau_s,
                a: p.amplitude,
                alpha: p.alpha_rad,
            },
            span_linewidths: p.span_linewidths,
            n_points: p.n_points,
        };
        let n = noise(run, p.snr_db, PAIR_STREAM, 0);
        let pair = gen_terminated_pair(&spec, &n)?;
        let truth = kv(&[
            ("p", pair.p),
            ("tan_delta", p.tan_delta),
            ("q_open", p.q_open),
            ("q_term", pair.q_term),
            ("f_term_hz", pair.f_term_hz),
        ]);
        for (name, trace, role) in [("open", &pair.open, Role::Open), ("terminated", &pair.terminated, Role::Terminated)] {
            let path = run.path(&format!("{name}.csv"));
            io::write_s21_csv(&path, trace)?;
            let meta =
                S21Meta { power_dbm: p.power_dbm, temperature_k: p.temperature_k, role, pair_id: p.pair_id.clone() };
            io::write_meta(&io::sidecar_path(&path), &meta)?;
            manifest.add(&path, name, &n, truth.clone());
        }
        let extract = format!(
            "z0_ohm = {}\n\n[[pair]]\nopen = \"open.csv\"\nterminated = \"terminated.csv\"\n",
            fmt_f64(p.z0_ohm)
        );
        let path = run.path("extract.toml");
        std::fs::write(&path, extract).with_context(|| format!("writing {}", path.display()))?;
        run.note(format!("extraction config: {}", path.display()));
    }

    for row in &manifest.table.rows {
        if let Cell::Text(file) = &row[0] {
            run.note(format!("wrote {file}"));
        }
    }
    let path = run.write_results("synth", &manifest.table)?;
    run.note(format!("manifest: {}", path.display()));
    Ok(())
}
