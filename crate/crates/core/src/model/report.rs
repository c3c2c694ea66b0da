//! Score report document.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CostUnit;
use crate::measure::MachineFingerprint;
use crate::score::{compute_aggregates, TaskEvaluation};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported report version {0} (expected {REPORT_VERSION})")]
    Version(u32),
    #[error("stored aggregates differ from the per-task records: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub suite_hash: String,
    pub machine: MachineFingerprint,
    pub unit: CostUnit,
    /// Counter backend used (`perf`, `callgrind` or `wall`).
    pub backend: String,
    pub repetitions: u32,
    pub sample_cap: usize,
    /// Free-form name of the evaluated model or sample pool.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub pass_at_1: Option<f64>,
    pub pass_at_1_by_split: BTreeMap<String, f64>,
    pub scored_tasks: usize,
    pub dps: Option<MetricSummary>,
    pub dps_norm: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dpe_report_version: u32,
    pub provenance: Provenance,
    pub tasks: Vec<TaskEvaluation>,
    pub aggregates: Aggregates,
}

impl ScoreReport {
    /// Builds a report whose aggregates are derived from `tasks`.
    pub fn new(provenance: Provenance, tasks: Vec<TaskEvaluation>) -> Self {
        let aggregates = compute_aggregates(&tasks, provenance.sample_cap);
        ScoreReport {
            dpe_report_version: REPORT_VERSION,
            provenance,
            tasks,
            aggregates,
        }
    }

    /// Recomputes the aggregates from the per-task records and compares.
    pub fn verify(&self) -> Result<(), ReportError> {
        if self.dpe_report_version != REPORT_VERSION {
            return Err(ReportError::Version(self.dpe_report_version));
        }
        let fresh = compute_aggregates(&self.tasks, self.provenance.sample_cap);
        if fresh != self.aggregates {
            return Err(ReportError::Inconsistent(format!(
                "stored {:?}, recomputed {:?}",
                self.aggregates, fresh
            )));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_json_pretty())?;
        Ok(())
    }

    /// Loads and verifies a report.
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path)?;
        let probe: serde_json::Value = serde_json::from_str(&text)?;
        let version = probe
            .get("dpe_report_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0) as u32;
        if version != REPORT_VERSION {
            return Err(ReportError::Version(version));
        }
        let report: ScoreReport = serde_json::from_value(probe)?;
        report.verify()?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::SampleScore;

    pub(crate) fn provenance(hash: &str) -> Provenance {
        Provenance {
            suite_hash: hash.into(),
            machine: MachineFingerprint {
                cpu_model: "test cpu".into(),
                logical_cpus: 1,
                kernel: "test".into(),
                perf_instructions: false,
                callgrind: false,
            },
            unit: CostUnit::Instructions,
            backend: "callgrind".into(),
            repetitions: 3,
            sample_cap: 10,
            label: "model".into(),
        }
    }

    fn sample(passed: bool, dps: f64) -> SampleScore {
        SampleScore {
            solution_id: "s".into(),
            passed,
            status: "ok".into(),
            failed_test: None,
            cost: passed.then_some(1.0),
            cv: passed.then_some(0.0),
            dps: passed.then_some(dps),
            dps_norm: passed.then_some(dps / 2.0),
        }
    }

    #[test]
    fn round_trip_and_verify() {
        let tasks = vec![TaskEvaluation {
            task_id: "algo/1".into(),
            split: "algo".into(),
            reference_costs: vec![10.0, 1.0],
            reference_ratios: vec![0.3, 1.0],
            samples: vec![sample(true, 30.0), sample(false, 0.0), sample(true, 0.1 + 0.2)],
        }];
        let report = ScoreReport::new(provenance("abc"), tasks);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        report.save(&path).unwrap();
        let back = ScoreReport::load(&path).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.aggregates.pass_at_1_by_split["algo"], 2.0 / 3.0);

        let mut tampered = report.clone();
        tampered.tasks[0].samples[0].dps = Some(90.0);
        assert!(tampered.verify().is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut report = ScoreReport::new(provenance("abc"), vec![]);
        report.dpe_report_version = 2;
        fs::write(&path, serde_json::to_string(&report).unwrap()).unwrap();
        assert!(matches!(ScoreReport::load(&path), Err(ReportError::Version(2))));
    }
}
