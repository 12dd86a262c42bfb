//! Scenario outcomes, the JSON run report and the artifact directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::error::CliError;

/// Plain decimals for ordinary magnitudes, exponent form otherwise.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// One scenario-internal assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable bound such as `> 0.95`.
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("metrics serialize to JSON");
        self.metrics.insert(name.to_string(), value);
    }

    pub fn above(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value, format!("> {}", fmt_num(bound)), value > bound);
    }

    pub fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value, format!("< {}", fmt_num(bound)), value < bound);
    }

    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{}, {}]", fmt_num(lo), fmt_num(hi)), (lo..=hi).contains(&value));
    }

    pub fn equals(&mut self, name: &str, value: f64, expected: f64) {
        self.push(name, value, format!("= {}", fmt_num(expected)), value == expected);
    }

    fn push(&mut self, name: &str, value: f64, bound: String, passed: bool) {
        self.checks.push(Check { name: name.to_string(), value, bound, passed });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Numeric metrics flattened to `name` or `name_i` columns.
    pub fn numeric_columns(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, value) in &self.metrics {
            flatten(name, value, &mut out);
        }
        out
    }
}

fn flatten(name: &str, value: &Value, out: &mut BTreeMap<String, f64>) {
    match value {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                out.insert(name.to_string(), x);
            }
        }
        Value::Bool(b) => {
            out.insert(name.to_string(), f64::from(u8::from(*b)));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{name}_{i}"), item, out);
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub status: Status,
    pub passed: bool,
    pub config: ScenarioConfig,
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    pub duration_s: f64,
}

impl RunReport {
    pub fn complete(config: &ScenarioConfig, outcome: Outcome, files: Vec<String>, duration_s: f64) -> Self {
        Self {
            scenario: config.scenario.clone(),
            status: Status::Complete,
            passed: outcome.passed(),
            config: config.clone(),
            metrics: outcome.metrics,
            checks: outcome.checks,
            files,
            error: None,
            duration_s,
        }
    }

    pub fn failed(config: &ScenarioConfig, error: &CliError, files: Vec<String>, duration_s: f64) -> Self {
        Self {
            scenario: config.scenario.clone(),
            status: Status::Incomplete,
            passed: false,
            config: config.clone(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            files,
            error: Some(StageError { stage: error.stage().to_string(), message: error.to_string() }),
            duration_s,
        }
    }

    pub fn outcome(&self) -> Outcome {
        Outcome { metrics: self.metrics.clone(), checks: self.checks.clone() }
    }
}

/// Output directory of one run. Data files are skipped when `data` is off,
/// as for sweep points, which keep only their report.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    data: bool,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, data: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), data, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn writes_data(&self) -> bool {
        self.data
    }

    /// Writes data file `name` unless data output is off.
    pub fn data_file(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
        if self.data {
            self.file(name, write)?;
        }
        Ok(())
    }

    /// Writes `name` unconditionally.
    pub fn file(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Lists a file written by someone else, relative to the directory.
    pub fn record(&mut self, name: String) {
        self.files.push(name);
    }

    pub fn files(&self) -> Vec<String> {
        self.files.clone()
    }
}

pub fn write_report(dir: &Path, name: &str, report: &RunReport) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattening_expands_arrays_and_booleans() {
        let mut o = Outcome::default();
        o.metric("n_eff", [1.56, 1.555]);
        o.metric("count", 2);
        o.metric("flag", true);
        o.metric("label", "x");
        let cols = o.numeric_columns();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols["n_eff_1"], 1.555);
        assert_eq!(cols["flag"], 1.0);
    }

    #[test]
    fn checks_record_pass_and_fail() {
        let mut o = Outcome::default();
        o.above("a", 0.96, 0.95);
        o.within("b", 7e-4, 4e-4, 1.2e-3);
        assert!(o.passed());
        o.below("c", 2e-3, 1e-3);
        assert!(!o.passed());
        assert_eq!(o.checks[2].bound, "< 0.001");
        o.below("d", 1e-9, 1e-8);
        assert_eq!(o.checks[3].bound, "< 1e-8");
    }

    #[test]
    fn skipped_data_files_are_not_listed() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path(), false).unwrap();
        a.data_file("x.csv", |w| Ok(writeln!(w, "1")?)).unwrap();
        a.file("r.txt", |w| Ok(writeln!(w, "2")?)).unwrap();
        assert_eq!(a.files(), vec!["r.txt".to_string()]);
        assert!(!dir.path().join("x.csv").exists());
    }
}
