use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SYNTH: &str = r#"
[s21]
fr_hz = 6e9
ql = 5e4
qc_mag = 6e4
phi0_rad = 0.1
tau_s = 40e-9
amplitude = 0.8
span_hz = 1.2e6
n_points = 801
snr_db = 40

[t1]
time_us = 1.11
amplitude = 0.9
offset = 0.05
span_us = 6
n_points = 101
snr_db = 30
repetitions = 5

[tempdep]
f01_ghz = 4.76
q_qubit = 3.3e4
temperatures_k = [0.015, 0.1, 0.2, 0.3, 0.4]
snr_db = 30

[pair]
p = 0.16
tan_delta = 3.31e-5
q_open = 1e5
f_open_hz = 6e9
qc_mag = 6e4
span_linewidths = 10
n_points = 601
snr_db = 40
pair_id = "D5"
power_dbm = -145
temperature_k = 0.02
"#;

fn metkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metkit")).current_dir(dir).args(args).output().expect("spawn metkit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, out: &str, seed: &str) -> Output {
    fs::write(dir.join("synth.toml"), SYNTH).unwrap();
    let o = metkit(dir, &["synth", "--config", "synth.toml", "--out", out, "--seed", seed]);
    assert!(o.status.success(), "{}", stderr(&o));
    o
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn synth_then_fit_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "data", "7");

    let o = metkit(dir, &["fit-s21", "data/s21.csv", "--out", "s21"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits = fs::read_to_string(dir.join("s21/s21_fits.csv")).unwrap();
    let fr: f64 = column(&fits, "fr_hz")[0].parse().unwrap();
    assert!((fr / 6e9 - 1.0).abs() < 1e-6, "fr = {fr}");
    assert!(dir.join("s21/s21_fit.csv").is_file());

    let o = metkit(dir, &["fit-decay", "t1", "data/t1", "--out", "t1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("5 of 5 traces fitted"));
    assert!(dir.join("t1/histogram.csv").is_file());

    let o = metkit(dir, &["fit-tempdep", "data/tempdep.csv", "--f01-ghz", "4.76", "--out", "td"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = metkit(dir, &["extract-tand", "--config", "data/extract.toml", "--out", "ex"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.join("ex/extraction.csv")).unwrap();
    assert_eq!(column(&report, "pair_id"), ["D5"]);
    let tand: f64 = column(&report, "tan_delta")[0].parse().unwrap();
    let sigma: f64 = column(&report, "sigma_tan_delta")[0].parse().unwrap();
    assert!((tand - 3.31e-5).abs() < 4.0 * sigma, "{tand} +- {sigma}");
    let summary = fs::read_to_string(dir.join("ex/summary.txt")).unwrap();
    assert!(summary.contains("config_sha256 = ") && summary.contains("failed fits = 0"));
}

#[test]
fn fixed_seed_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "a", "11");
    synth(dir, "b", "11");
    synth(dir, "c", "12");
    for f in ["s21.csv", "t1/t1_003.csv", "tempdep.csv", "terminated.csv"] {
        let a = fs::read(dir.join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.join("b").join(f)).unwrap(), "{f}");
        assert_ne!(a, fs::read(dir.join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_input_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = metkit(tmp.path(), &["fit-s21", "nope.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn malformed_csv_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.csv"), "delay_s,p_excited\n0,1\n1e-6,oops\n").unwrap();
    let o = metkit(dir, &["fit-decay", "t1", "bad.csv"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn config_without_unit_suffix_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("d.toml"), "[[device]]\nname = \"x\"\narea = 20\nlayers = 17\n").unwrap();
    let o = metkit(dir, &["design", "--config", "d.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn design_defaults_to_the_anchor() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = metkit(dir, &["design", "--out", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("d/design.csv")).unwrap();
    let f01: f64 = column(&csv, "f01_asymptotic_ghz")[0].parse().unwrap();
    assert!((f01 - 6.0).abs() < 1e-9);
}

#[test]
fn design_device_participation_and_chart_switch() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = "[[device]]\nname = \"d1\"\narea_um2 = 20\nlayers = 17\ncg_ff = 4\nresonator_ghz = 7\n\n\
               [chart]\narea_um2 = 20\nlayers_min = 14\nlayers_max = 20\nresonators_ghz = []\n";
    fs::write(dir.join("d.toml"), cfg).unwrap();
    let o = metkit(dir, &["design", "--config", "d.toml", "--out", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("chart omitted"));
    assert!(!dir.join("d/chart.csv").exists());
    let csv = fs::read_to_string(dir.join("d/design.csv")).unwrap();
    let p: f64 = column(&csv, "participation")[0].parse().unwrap();
    assert!((p - 0.97).abs() < 0.005, "p = {p}");
    assert!(!column(&csv, "g_mhz")[0].is_empty());

    fs::write(dir.join("d.toml"), cfg.replace("resonators_ghz = []", "resonators_ghz = [6, 7]")).unwrap();
    let o = metkit(dir, &["design", "--config", "d.toml", "--out", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let chart = fs::read_to_string(dir.join("d/chart.csv")).unwrap();
    // One row per layer count, paired with the nearest resonator.
    assert_eq!(chart.lines().count(), 1 + 7);
}

#[test]
fn check_tables_reproduces_loss_tangents() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = metkit(dir, &["check-tables", "--out", "ct"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for (dev, v) in [(1, "3.09"), (2, "1.69"), (3, "12.2"), (4, "15.76")] {
        let line = text.lines().find(|l| l.starts_with(&format!("device {dev} tan_delta"))).unwrap();
        assert!(line.contains("PASS") && line.contains(v), "{line}");
    }
    assert!(text.lines().any(|l| l.starts_with("device 3") && l.contains('[')));

    fs::write(dir.join("t.toml"), "qubit = []\n").unwrap();
    let o = metkit(dir, &["check-tables", "--config", "t.toml", "--out", "empty"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no devices to check"));
    assert_eq!(fs::read_to_string(dir.join("empty/check_tables.csv")).unwrap().lines().count(), 1);
}

#[test]
fn json_lines_carry_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = metkit(dir, &["check-tables", "--format", "json-lines", "--out", "j"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.join("j/check_tables.jsonl")).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn constants_lists_codata_values() {
    let tmp = tempfile::tempdir().unwrap();
    let o = metkit(tmp.path(), &["constants"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("planck,6.62607015e-34"));
}
