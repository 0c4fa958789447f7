use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::HarnessError;

/// Floats are rounded before they reach a table so outputs diff cleanly.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Value> {
        self.rows.get(row)?.get(self.column(column)?)
    }

    pub fn f64_at(&self, row: usize, column: &str) -> Option<f64> {
        self.get(row, column)?.as_f64()
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            }))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One JSON object per row, keyed by column.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| Value::Object(self.columns.iter().cloned().zip(row.iter().cloned()).collect()))
                .collect(),
        )
    }
}

/// Shorthand for building table rows from mixed cell types.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => {
        vec![$($crate::report::Cell::from($cell).0),*]
    };
}

pub struct Cell(pub Value);

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell(if x.is_finite() { serde_json::json!(round6(x)) } else { Value::Null })
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(x: $t) -> Self {
                Cell(serde_json::json!(x))
            }
        }
    )*};
}
int_cell!(u32, u64, usize, i64, bool);

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell(Value::String(s.to_string()))
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell(Value::String(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Standard error of a binomial proportion with success probability `p`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|observed - expected| <= 3 SE`, with SE from the expected rate.
pub fn within_three_se(name: impl Into<String>, observed: f64, expected: f64, n: usize) -> Check {
    let se = binomial_se(expected, n);
    let pass = (observed - expected).abs() <= 3.0 * se + 1e-12;
    Check::new(name, pass, format!("observed {observed:.4}, closed form {expected:.4}, 3SE {:.4}, n {n}", 3.0 * se))
}

/// Everything one subcommand produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub repeats: u32,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Extra artifacts written verbatim: (file name, contents).
    #[serde(skip)]
    pub attachments: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    repeats: u32,
    passed: bool,
    checks: &'a [Check],
    tables: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, repeats: u32) -> Self {
        Self { experiment: experiment.to_string(), seed, repeats, tables: Vec::new(), checks: Vec::new(), attachments: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes one file per table plus `summary.json`; returns the paths.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut names = Vec::new();
        for table in &self.tables {
            let (file, body) = match format {
                OutputFormat::Csv => (format!("{}.csv", table.name), table.to_csv()?),
                OutputFormat::Json => (format!("{}.json", table.name), serde_json::to_string_pretty(&table.to_json())? + "\n"),
            };
            let path = dir.join(&file);
            fs::write(&path, body)?;
            names.push(file);
            written.push(path);
        }
        for (file, body) in &self.attachments {
            let path = dir.join(file);
            fs::write(&path, body)?;
            written.push(path);
        }
        let summary = Summary {
            experiment: &self.experiment,
            seed: self.seed,
            repeats: self.repeats,
            passed: self.passed(),
            checks: &self.checks,
            tables: names,
        };
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        written.push(path);
        Ok(written)
    }
}
