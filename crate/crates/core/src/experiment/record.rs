//! Result records, run manifests and their on-disk form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentKind;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A scalar result with its unit or scale annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub unit: String,
}

/// One pass/fail predicate of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    /// Distance to failure; negative when the check fails.
    pub margin: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
            margin: threshold - measured,
            detail: detail.into(),
        }
    }

    /// Passes when `measured >= threshold`.
    pub fn at_least(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
            margin: measured - threshold,
            detail: detail.into(),
        }
    }
}

/// A table of numbers with named columns, persisted as `series_<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("series_{}.csv", self.name)
    }

    /// CSV text with a header row and 17 significant digits per value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn read_rows(&mut self, text: &str) -> Result<()> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if header != self.columns {
            return Err(Error::Config(format!(
                "series '{}' header {:?} does not match {:?}",
                self.name, header, self.columns
            )));
        }
        self.rows.clear();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Config(format!("bad number '{f}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            self.rows.push(row);
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub metrics: BTreeMap<String, Metric>,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// SHA-256 over the record body and the rendered series.
    #[serde(default)]
    pub checksum: String,
}

impl ResultRecord {
    pub fn new(kind: ExperimentKind, config_hash: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            config_hash,
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            series: Vec::new(),
            notes: Vec::new(),
            checksum: String::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64, unit: &str) {
        self.metrics.insert(
            name.into(),
            Metric {
                value,
                unit: unit.into(),
            },
        );
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn compute_checksum(&self) -> Result<String> {
        let mut body = self.clone();
        body.checksum.clear();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&body)?);
        for s in &self.series {
            h.update(s.name.as_bytes());
            h.update(s.to_csv()?.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn seal(mut self) -> Result<Self> {
        self.checksum = self.compute_checksum()?;
        Ok(self)
    }

    pub fn is_intact(&self) -> bool {
        self.compute_checksum().map(|c| c == self.checksum).unwrap_or(false)
    }

    /// Reads `summary.json` and the series files of a run directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("summary.json"))?;
        let mut rec: ResultRecord = serde_json::from_str(&text)?;
        for s in rec.series.iter_mut() {
            let csv = std::fs::read_to_string(dir.join(s.file_name()))?;
            s.read_rows(&csv)?;
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStatus {
    pub name: String,
    pub passed: bool,
}

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub checks: Vec<CheckStatus>,
    pub all_passed: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut s = Series::new("demo", &["x", "y"]);
        s.push(vec![0.1, 1.0 / 3.0]);
        s.push(vec![-2.5e-300, std::f64::consts::PI]);
        let text = s.to_csv().unwrap();
        assert!(text.starts_with("x,y\n"));
        let mut back = Series::new("demo", &["x", "y"]);
        back.read_rows(&text).unwrap();
        assert_eq!(back.rows, s.rows);
    }

    #[test]
    fn checksum_detects_edits() {
        let mut r = ResultRecord::new(ExperimentKind::AlphaScaling, "abc".into());
        r.metric("slope", 3.0, "dimensionless");
        let mut s = Series::new("fit", &["alpha"]);
        s.push(vec![0.1]);
        r.series.push(s);
        let r = r.seal().unwrap();
        assert!(r.is_intact());
        let mut t = r.clone();
        t.metrics.get_mut("slope").unwrap().value = 3.01;
        assert!(!t.is_intact());
        let mut u = r.clone();
        u.series[0].rows[0][0] = 0.2;
        assert!(!u.is_intact());
    }
}
