//! Output tables: CSV (column names on the first line, 17 significant digits), a JSON sidecar
//! carrying the full configuration, and aligned text. Every file records the config hash and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn txt(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.6e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Lossless decimal form: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the columns");
        self.rows.push(row);
    }

    /// Column names, then the `#` comment lines, then one line per row.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for c in comments {
            let _ = writeln!(s, "# {c}");
        }
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::csv).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_txt(&self, comments: &[String]) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::txt).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain([self.columns[j].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = String::new();
        for c in comments {
            let _ = writeln!(s, "# {c}");
        }
        let line = |items: &[String]| {
            items
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(s, "{}", line(&self.columns).trim_end());
        for r in &cells {
            let _ = writeln!(s, "{}", line(r).trim_end());
        }
        s
    }
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    notes: &'a [String],
    config: &'a RunConfig,
    result: &'a T,
}

/// Writes the outputs of one command into the configured directory.
#[derive(Debug, Clone)]
pub struct ReportWriter {
    dir: PathBuf,
    formats: Vec<Format>,
    config: RunConfig,
    hash: String,
}

impl ReportWriter {
    pub fn new(config: &RunConfig) -> Self {
        ReportWriter {
            dir: config.output.dir.clone(),
            formats: config.output.formats.clone(),
            hash: config.hash(),
            config: config.clone(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self, notes: &[String]) -> Vec<String> {
        let mut h = vec![format!("config_hash={} seed={}", self.hash, self.config.seed)];
        h.extend(notes.iter().cloned());
        h
    }

    /// Writes `name.csv`, `name.json` and `name.txt` as requested; returns the paths written.
    pub fn write<T: Serialize>(&self, name: &str, table: &Table, result: &T, notes: &[String]) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let header = self.header(notes);
        let mut written = Vec::new();
        for f in &self.formats {
            let (ext, body) = match f {
                Format::Csv => ("csv", table.to_csv(&header)),
                Format::Txt => ("txt", table.to_txt(&header)),
                Format::Json => {
                    let side = Sidecar {
                        config_hash: &self.hash,
                        seed: self.config.seed,
                        notes,
                        config: &self.config,
                        result,
                    };
                    ("json", serde_json::to_string_pretty(&side)? + "\n")
                }
            };
            let path = self.dir.join(format!("{name}.{ext}"));
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Reads the configuration back out of a JSON sidecar.
pub fn config_from_sidecar(json: &str) -> Result<RunConfig> {
    let v: serde_json::Value = serde_json::from_str(json)?;
    let cfg: RunConfig = serde_json::from_value(v["config"].clone())?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        for x in [
            0.1,
            1.0 / 3.0,
            2.0f64.sqrt() * 1e-300,
            -123456.789e10,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_starts_with_column_names() {
        let mut t = Table::new(&["eps", "label"]);
        t.push(vec![0.1.into(), "a,b".into()]);
        let s = t.to_csv(&["config_hash=abc seed=1".into()]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "eps,label");
        assert_eq!(lines[1], "# config_hash=abc seed=1");
        assert_eq!(lines[2], "1.0000000000000001e-1,\"a,b\"");
    }

    #[test]
    fn sidecar_reparses_to_the_same_config() {
        let dir = std::env::temp_dir().join(format!("roughvol-report-{}", std::process::id()));
        let mut cfg = RunConfig::default();
        cfg.output.dir = dir.clone();
        let w = ReportWriter::new(&cfg);
        let paths = w.write("demo", &Table::new(&["x"]), &1.5f64, &[]).unwrap();
        let json = fs::read_to_string(paths.iter().find(|p| p.extension().unwrap() == "json").unwrap()).unwrap();
        assert_eq!(config_from_sidecar(&json).unwrap(), cfg);
        fs::remove_dir_all(dir).unwrap();
    }
}
