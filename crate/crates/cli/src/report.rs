//! Run context and result emission: one machine-readable result file, a
//! plain-text summary and any number of plot-data CSVs per run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use metkit::io::fmt_f64;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    /// Values above i64::MAX stay exact as text.
    fn from(v: u64) -> Self {
        i64::try_from(v).map_or_else(|_| Cell::Text(v.to_string()), Cell::Int)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Empty => String::new(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // JSON has no NaN/inf; they become null.
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

/// Column-ordered result rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_lines(&self, config_sha256: &str) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut map = Map::new();
            for (c, v) in self.columns.iter().zip(row) {
                map.insert((*c).to_string(), v.json());
            }
            map.insert("config_sha256".into(), Value::String(config_sha256.to_string()));
            out.push_str(&Value::Object(map).to_string());
            out.push('\n');
        }
        out
    }
}

pub struct Run {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub config_sha256: String,
    pub command: String,
    summary: String,
    failures: usize,
}

impl Run {
    /// `provenance` is the config file text when there is one, otherwise the
    /// normalized command line.
    pub fn new(out_dir: PathBuf, format: Format, seed: u64, tolerance: Option<f64>, command: &str, provenance: &[u8]) -> Self {
        let config_sha256 = Sha256::digest(provenance).iter().map(|b| format!("{b:02x}")).collect();
        Self { out_dir, format, seed, tolerance, config_sha256, command: command.into(), summary: String::new(), failures: 0 }
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn note(&mut self, line: impl AsRef<str>) {
        self.summary.push_str(line.as_ref());
        self.summary.push('\n');
    }

    /// Records a fit that failed or did not converge; it turns the exit code non-zero.
    pub fn fail(&mut self, line: impl AsRef<str>) {
        self.failures += 1;
        self.note(line);
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Writes `<stem>.csv` or `<stem>.jsonl` according to `--format`.
    pub fn write_results(&self, stem: &str, table: &Table) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let (path, text) = match self.format {
            Format::Csv => (self.path(&format!("{stem}.csv")), table.to_csv()),
            Format::JsonLines => (self.path(&format!("{stem}.jsonl")), table.to_json_lines(&self.config_sha256)),
        };
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Plot data is always CSV.
    pub fn write_plot(&self, name: &str, table: &Table) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let path = self.path(name);
        fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn finish(&self) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let mut text = String::new();
        writeln!(text, "metkit {} ({})", self.command, env!("CARGO_PKG_VERSION"))?;
        writeln!(text, "config_sha256 = {}", self.config_sha256)?;
        writeln!(text, "seed = {}", self.seed)?;
        if let Some(t) = self.tolerance {
            writeln!(text, "tolerance = {}", fmt_f64(t))?;
        }
        writeln!(text, "failed fits = {}", self.failures)?;
        writeln!(text)?;
        text.push_str(&self.summary);
        let path = self.path("summary.txt");
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        print!("{}", self.summary);
        Ok(path)
    }
}

/// Resolves `p` against the directory of the config file.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting_and_json_nulls() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![Cell::Num(f64::NAN), "x,y".into(), Cell::Empty]);
        assert_eq!(t.to_csv(), "a,b,c\nNaN,\"x,y\",\n");
        let line = t.to_json_lines("abc");
        assert_eq!(line.trim(), r#"{"a":null,"b":"x,y","c":null,"config_sha256":"abc"}"#);
    }
}
