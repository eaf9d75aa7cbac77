//! Flat-file formats: CSV data with fixed headers and TOML metadata sidecars.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{ChartRow, CHART_HEADER};
use crate::resonator::{BatchRow, S21Trace};
use crate::timedomain::{ChevronGrid, DecayTrace};
use crate::{Error, Result};

pub const S21_HEADER: &str = "frequency_hz,re,im";
pub const DECAY_HEADER: &str = "delay_s,p_excited";
pub const CHEVRON_HEADER: &str = "pulse_length_s,drive_freq_hz,p_excited";
pub const TEMPDEP_HEADER: &str = "temperature_k,t1_s,t1_err_s";
pub const EXTRACTION_HEADER: &str =
    "pair_id,power_dbm,temperature_k,f_open_hz,q_open,f_term_hz,q_term,p,tan_delta,sigma_tan_delta,c_load_ff";

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Rows of numbers under an exact header.
fn read_numeric(path: &Path, header: &str) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(
        |e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse { line: 0, message: format!("{}: {other:?}", path.display()) },
        },
    )?;
    let width = header.split(',').count();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: format!("{}: {e}", path.display()),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            let got: Vec<&str> = record.iter().collect();
            if got.join(",") != header {
                return Err(Error::Parse {
                    line,
                    message: format!("{}: expected header `{header}`, found `{}`", path.display(), got.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("{}: expected {width} fields, found {}", path.display(), record.len()),
            });
        }
        let values = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("{}: `{field}` is not a number", path.display()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    if !seen_header {
        return Err(Error::Parse { line: 1, message: format!("{}: empty file, expected `{header}`", path.display()) });
    }
    Ok(rows)
}

fn write_lines(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "{header}")?;
    for line in lines {
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn read_s21_csv(path: &Path) -> Result<S21Trace> {
    let rows = read_numeric(path, S21_HEADER)?;
    let freqs = rows.iter().map(|r| r.1[0]).collect();
    let values = rows.iter().map(|r| Complex64::new(r.1[1], r.1[2])).collect();
    S21Trace::new(freqs, values)
}

pub fn write_s21_csv(path: &Path, trace: &S21Trace) -> Result<()> {
    write_lines(
        path,
        S21_HEADER,
        trace.freqs.iter().zip(&trace.values).map(|(f, z)| join(&[*f, z.re, z.im])),
    )
}

pub fn read_decay_csv(path: &Path) -> Result<DecayTrace> {
    let rows = read_numeric(path, DECAY_HEADER)?;
    DecayTrace::new(rows.iter().map(|r| r.1[0]).collect(), rows.iter().map(|r| r.1[1]).collect())
}

pub fn write_decay_csv(path: &Path, trace: &DecayTrace) -> Result<()> {
    write_lines(path, DECAY_HEADER, trace.delays_s.iter().zip(&trace.populations).map(|(t, p)| join(&[*t, *p])))
}

/// Long-format chevron; every (pulse length, drive frequency) pair must appear once.
pub fn read_chevron_csv(path: &Path) -> Result<ChevronGrid> {
    let rows = read_numeric(path, CHEVRON_HEADER)?;
    let mut lengths: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    let mut freqs: Vec<f64> = rows.iter().map(|r| r.1[1]).collect();
    for v in [&mut lengths, &mut freqs] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let mut grid = vec![vec![f64::NAN; lengths.len()]; freqs.len()];
    for (line, r) in &rows {
        let j = lengths.binary_search_by(|x| x.total_cmp(&r[0])).expect("value present");
        let i = freqs.binary_search_by(|x| x.total_cmp(&r[1])).expect("value present");
        if !grid[i][j].is_nan() {
            return Err(Error::Parse {
                line: *line,
                message: format!("{}: duplicate grid point ({}, {})", path.display(), r[0], r[1]),
            });
        }
        grid[i][j] = r[2];
    }
    if grid.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "{}: grid is not rectangular ({} rows for {} lengths x {} frequencies)",
                path.display(),
                rows.len(),
                lengths.len(),
                freqs.len()
            ),
        });
    }
    ChevronGrid::new(lengths, freqs, grid)
}

pub fn write_chevron_csv(path: &Path, grid: &ChevronGrid) -> Result<()> {
    let mut lines = Vec::new();
    for (i, f) in grid.drive_freqs_hz.iter().enumerate() {
        for (j, t) in grid.pulse_lengths_s.iter().enumerate() {
            lines.push(join(&[*t, *f, grid.populations[i][j]]));
        }
    }
    write_lines(path, CHEVRON_HEADER, lines)
}

/// T1 versus temperature, in SI units as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TempDepData {
    pub temps_k: Vec<f64>,
    pub t1_s: Vec<f64>,
    pub t1_err_s: Vec<f64>,
}

pub fn read_tempdep_csv(path: &Path) -> Result<TempDepData> {
    let rows = read_numeric(path, TEMPDEP_HEADER)?;
    Ok(TempDepData {
        temps_k: rows.iter().map(|r| r.1[0]).collect(),
        t1_s: rows.iter().map(|r| r.1[1]).collect(),
        t1_err_s: rows.iter().map(|r| r.1[2]).collect(),
    })
}

pub fn write_tempdep_csv(path: &Path, data: &TempDepData) -> Result<()> {
    write_lines(
        path,
        TEMPDEP_HEADER,
        (0..data.temps_k.len()).map(|i| join(&[data.temps_k[i], data.t1_s[i], data.t1_err_s[i]])),
    )
}

pub fn write_chart_csv(path: &Path, rows: &[ChartRow]) -> Result<()> {
    write_lines(path, CHART_HEADER, rows.iter().map(ChartRow::csv_line))
}

/// Successful rows only; failures belong in the run summary.
pub fn write_extraction_report(path: &Path, rows: &[BatchRow]) -> Result<()> {
    let lines = rows.iter().filter_map(|row| {
        let x = row.result.as_ref().ok()?;
        Some(format!(
            "{},{},{},{}",
            row.pair_id,
            fmt_opt(row.power_dbm),
            fmt_opt(row.temperature_k),
            join(&[x.f_open_hz, x.q_open, x.f_term_hz, x.q_term, x.p, x.tan_delta, x.sigma_tan_delta, x.c_load_ff])
        ))
    });
    write_lines(path, EXTRACTION_HEADER, lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Open,
    Terminated,
}

/// Contents of a `<stem>.meta.toml` sidecar next to an S21 CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S21Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    pub role: Role,
    pub pair_id: String,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.toml"))
}

pub fn read_meta(path: &Path) -> Result<S21Meta> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() as u64 + 1).unwrap_or(0);
        Error::Parse { line, message: format!("{}: {}", path.display(), e.message()) }
    })
}

pub fn write_meta(path: &Path, meta: &S21Meta) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// S21 trace with power and temperature taken from its sidecar.
pub fn read_s21_with_meta(csv_path: &Path) -> Result<(S21Trace, S21Meta)> {
    let meta = read_meta(&sidecar_path(csv_path))?;
    let trace = read_s21_csv(csv_path)?.with_conditions(meta.power_dbm, meta.temperature_k);
    Ok((trace, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_float_text() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(6e9), "6000000000.0");
        assert_eq!(fmt_f64(1e-20), "1e-20");
        for v in [1.0 / 3.0, 4.76e9 + 0.123, -2.5e-17] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "delay,p\n0,1\n").unwrap();
        assert!(matches!(read_decay_csv(&p), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "delay_s,p_excited\n0,1\n1e-7,abc\n").unwrap();
        assert!(matches!(read_decay_csv(&p), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&p, "delay_s,p_excited\n0,1\n1e-7\n").unwrap();
        match read_decay_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sidecar_naming_and_unknown_keys() {
        assert_eq!(sidecar_path(Path::new("/a/open_01.csv")), Path::new("/a/open_01.meta.toml"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.meta.toml");
        std::fs::write(&p, "role = \"open\"\npair_id = \"A\"\npower = 3\n").unwrap();
        assert!(matches!(read_meta(&p), Err(Error::Parse { line: 3, .. })));
    }
}
