//! Per-trial records (JSON lines) and summary rows (CSV).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calculus::BoundSummary;
use crate::error::Result;
use crate::spectral::LocalizationVerdict;

use super::stats::ProbabilityEstimate;

/// One trial. Everything except `wall_time_ms` is a function of the
/// configuration and `trial_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub trial_index: u64,
    pub seed: u64,
    pub box_id: String,
    pub verdict: Option<LocalizationVerdict>,
    pub achieved_rate: Option<f64>,
    pub level_spacing: Option<bool>,
    pub ground_state_energy: Option<f64>,
    pub bounds: Vec<BoundSummary>,
    /// Whether the hypotheses of the statement under test held.
    pub hypothesis_ok: Option<bool>,
    pub success: Option<bool>,
    pub extra: BTreeMap<String, Value>,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    pub fn new(experiment: &str, trial_index: u64, seed: u64, box_id: impl Into<String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            trial_index,
            seed,
            box_id: box_id.into(),
            verdict: None,
            achieved_rate: None,
            level_spacing: None,
            ground_state_energy: None,
            bounds: Vec::new(),
            hypothesis_ok: None,
            success: None,
            extra: BTreeMap::new(),
            wall_time_ms: 0.0,
        }
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.extra.insert(key.to_string(), v);
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(Value::as_f64)
    }

    pub fn get_bool(&self, key: &str) -> Option<bool> {
        self.extra.get(key).and_then(Value::as_bool)
    }

    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// The line with the timing field zeroed, for reproducibility checks.
    pub fn canonical_line(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_time_ms = 0.0;
        r.to_line()
    }
}

/// Streams records one line at a time, flushing after each.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl RecordWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, r: &TrialRecord) -> Result<()> {
        self.out.write_all(r.to_line()?.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// One row of an experiment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub label: String,
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: Option<f64>,
    pub vacuous: bool,
    pub non_violation: bool,
    pub note: String,
}

impl SummaryRow {
    pub fn from_estimate(experiment: &str, label: impl Into<String>, e: &ProbabilityEstimate) -> Self {
        Self {
            experiment: experiment.to_string(),
            label: label.into(),
            successes: e.successes,
            trials: e.trials,
            estimate: e.estimate,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            bound: e.bound,
            vacuous: e.vacuous(),
            non_violation: e.non_violation(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn estimate(&self) -> ProbabilityEstimate {
        ProbabilityEstimate {
            successes: self.successes,
            trials: self.trials,
            estimate: self.estimate,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            bound: self.bound,
        }
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_order_is_stable() {
        let mut r = TrialRecord::new("start", 3, 7, "L=21");
        r.put("zeta", 1.0);
        r.put("alpha", true);
        let line = r.to_line().unwrap();
        let first = line.find("\"experiment\"").unwrap();
        let last = line.find("\"wall_time_ms\"").unwrap();
        assert!(first < line.find("\"trial_index\"").unwrap());
        assert!(line.find("\"alpha\"").unwrap() < line.find("\"zeta\"").unwrap());
        assert!(line.find("\"extra\"").unwrap() < last);
        let back: TrialRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn canonical_ignores_timing() {
        let mut a = TrialRecord::new("x", 0, 1, "b");
        let mut b = a.clone();
        a.wall_time_ms = 3.5;
        b.wall_time_ms = 9.0;
        assert_ne!(a.to_line().unwrap(), b.to_line().unwrap());
        assert_eq!(a.canonical_line().unwrap(), b.canonical_line().unwrap());
    }

    #[test]
    fn roundtrip_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let mut w = RecordWriter::create(&p).unwrap();
        for i in 0..3 {
            w.write(&TrialRecord::new("x", i, 1, "b")).unwrap();
        }
        drop(w);
        let rs = read_records(&p).unwrap();
        assert_eq!(rs.iter().map(|r| r.trial_index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn summary_csv_header() {
        let e = ProbabilityEstimate::wilson(3, 4, Some(0.5)).unwrap();
        let rows = vec![SummaryRow::from_estimate("spacing", "L=13, with comma", &e)];
        let mut buf = Vec::new();
        write_summary(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("experiment,label,successes,trials,estimate"));
        assert!(s.contains("\"L=13, with comma\""));
    }
}
