//! Tables, checks and the run report, with their on-disk forms.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// One CSV cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A named CSV table, written to `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Direction of a threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// A measured value against a declared threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
    /// `file:column` holding the cells the value was computed from.
    pub source: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64, source: &str) -> Self {
        Self::new(name, value, Relation::AtMost, threshold, source)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64, source: &str) -> Self {
        Self::new(name, value, Relation::AtLeast, threshold, source)
    }

    fn new(name: &str, value: f64, relation: Relation, threshold: f64, source: &str) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        };
        Self {
            name: name.to_string(),
            value,
            relation,
            threshold,
            passed,
            source: source.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {:.6e} {} {:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.threshold
        )
    }

    pub const CSV_HEADER: [&'static str; 6] = ["name", "value", "relation", "threshold", "passed", "source"];

    pub fn cells(&self) -> Vec<Cell> {
        vec![
            self.name.as_str().into(),
            self.value.into(),
            self.relation.symbol().into(),
            self.threshold.into(),
            Cell::Int(self.passed as i64),
            self.source.as_str().into(),
        ]
    }
}

/// Plot kinds, each with the CSV columns it reads.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// `y` against `x` on logarithmic axes with the least-squares slope.
    LogLogFit { x: String, y: String },
    /// `value` binned over the `(x, y)` plane.
    Heatmap { x: String, y: String, value: String },
    /// Curves of the `ys` columns against `x`, one per distinct `group`.
    Profile { x: String, ys: Vec<String>, group: Option<String> },
}

/// An SVG rendered from one of the written tables.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub table: String,
    pub file: String,
    pub title: String,
    pub kind: PlotKind,
}

impl PlotSpec {
    pub fn loglog(table: &str, x: &str, y: &str, title: &str) -> Self {
        Self::new(table, title, PlotKind::LogLogFit { x: x.into(), y: y.into() })
    }

    pub fn heatmap(table: &str, x: &str, y: &str, value: &str, title: &str) -> Self {
        Self::new(
            table,
            title,
            PlotKind::Heatmap {
                x: x.into(),
                y: y.into(),
                value: value.into(),
            },
        )
    }

    pub fn profile(table: &str, x: &str, ys: &[&str], group: Option<&str>, title: &str) -> Self {
        Self::new(
            table,
            title,
            PlotKind::Profile {
                x: x.into(),
                ys: ys.iter().map(|s| s.to_string()).collect(),
                group: group.map(str::to_string),
            },
        )
    }

    fn new(table: &str, title: &str, kind: PlotKind) -> Self {
        Self {
            table: table.into(),
            file: format!("{table}.svg"),
            title: title.into(),
            kind,
        }
    }
}

/// Everything an experiment produced before it is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub plots: Vec<PlotSpec>,
    /// Sub-runs that failed, with the reason.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

/// The persisted summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    /// Echo of the configuration, re-runnable as is.
    pub config: String,
    pub csv: Vec<String>,
    pub svg: Vec<String>,
    pub failures: Vec<String>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}
