//! Tabular output: CSV with 12 significant digits and a JSON mirror.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::blockavg::CoefficientRow;
use crate::bootstrap::IterationRow;
use crate::config::OutputFormat;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("cannot parse `{value}` in column `{column}`")]
    BadValue { column: String, value: String },
}

/// Round to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Shortest text that parses back to `round12(v)`.
pub fn fmt12(v: f64) -> String {
    format!("{:?}", round12(v))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => fmt12(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Real(v) => {
                let r = round12(*v);
                if r.is_finite() {
                    json!(r)
                } else {
                    json!(fmt12(r))
                }
            }
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReportError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(Cell::render))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "table": self.name,
            "columns": self.columns,
            "rows": self
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
                .collect::<Vec<_>>(),
        })
    }

    /// Writes `<dir>/<name>.csv` or `<dir>/<name>.json`.
    pub fn save(&self, dir: &Path, format: OutputFormat) -> Result<PathBuf, ReportError> {
        fs::create_dir_all(dir)?;
        let path = match format {
            OutputFormat::Csv => dir.join(format!("{}.csv", self.name)),
            OutputFormat::Json => dir.join(format!("{}.json", self.name)),
        };
        let mut f = fs::File::create(&path)?;
        match format {
            OutputFormat::Csv => self.write_csv(&mut f)?,
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut f, &self.to_json())?;
                f.write_all(b"\n")?;
            }
        }
        Ok(path)
    }
}

/// A CSV file read back as text cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn read<R: Read>(r: R) -> Result<Self, ReportError> {
        let mut rd = csv::Reader::from_reader(r);
        let columns = rd.headers()?.iter().map(String::from).collect();
        let rows = rd
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(ParsedTable { columns, rows })
    }

    pub fn from_path(path: &Path) -> Result<Self, ReportError> {
        Self::read(fs::File::open(path)?)
    }

    pub fn index(&self, column: &str) -> Result<usize, ReportError> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| ReportError::MissingColumn(column.into()))
    }

    pub fn column_f64(&self, column: &str) -> Result<Vec<f64>, ReportError> {
        let k = self.index(column)?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse().map_err(|_| ReportError::BadValue {
                    column: column.into(),
                    value: r[k].clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub i: usize,
    pub j: usize,
    pub dist: u64,
    pub value: f64,
    pub stderr: f64,
    pub method: String,
}

pub fn covariance_table(rows: &[CovarianceRow]) -> Table {
    let mut t = Table::new("covariance", &["i", "j", "dist", "value", "stderr", "method"]);
    for r in rows {
        t.push(vec![
            r.i.into(),
            r.j.into(),
            r.dist.into(),
            r.value.into(),
            r.stderr.into(),
            r.method.as_str().into(),
        ]);
    }
    t
}

pub fn coefficient_table(rows: &[CoefficientRow]) -> Table {
    let mut t = Table::new(
        "coefficients",
        &["d", "R", "quantity", "offset", "value", "bound", "ratio"],
    );
    for r in rows {
        t.push(vec![
            r.d.into(),
            r.radius.into(),
            r.quantity.as_str().into(),
            r.offset.as_str().into(),
            r.value.into(),
            r.bound.into(),
            r.ratio.into(),
        ]);
    }
    t
}

pub fn bootstrap_table(rows: &[IterationRow]) -> Table {
    let mut t = Table::new(
        "bootstrap",
        &["iteration", "dist", "max_bound", "C_fit", "alpha_fit", "coupling", "L"],
    );
    for r in rows {
        t.push(vec![
            r.iteration.into(),
            r.dist.into(),
            r.max_bound.into(),
            r.c_fit.into(),
            r.alpha_fit.into(),
            r.coupling.into(),
            r.l.into(),
        ]);
    }
    t
}

/// Key/value record of a run: config hash, seeds, library version and time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        let mut m = Manifest::default();
        m.insert("command", command);
        m.insert("config_sha256", config_hash);
        m.insert("seed", &seed.to_string());
        m.insert("version", env!("CARGO_PKG_VERSION"));
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        m.insert("timestamp", &now.to_string());
        m
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("manifest", &["key", "value"]);
        for (k, v) in &self.entries {
            t.push(vec![k.as_str().into(), v.as_str().into()]);
        }
        t
    }
}
