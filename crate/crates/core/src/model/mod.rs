//! Domain types shared by every stage, plus the on-disk suite and report
//! formats.

pub mod report;
pub mod suite;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::stats::{self, StatsError};
use crate::value::{Args, Value};

pub use report::{Aggregates, MetricSummary, Provenance, ScoreReport, REPORT_VERSION};
pub use suite::{
    load_solutions, load_suite, render_suite, save_solutions, save_suite, suite_hash, SolutionRecord,
    SuiteError,
};

#[derive(Debug, Error, PartialEq)]
pub enum InvariantError {
    #[error("task {task_id}: {reason}")]
    Task { task_id: String, reason: String },
    #[error("reference set: {0}")]
    References(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostUnit {
    Instructions,
    WallNs,
}

impl fmt::Display for CostUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostUnit::Instructions => "instructions",
            CostUnit::WallNs => "wall_ns",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub args: Args,
    pub expected: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub solution_id: String,
    pub source: String,
    #[serde(default)]
    pub origin: String,
}

impl Solution {
    pub fn new(id: impl Into<String>, source: impl Into<String>, origin: impl Into<String>) -> Self {
        Solution {
            solution_id: id.into(),
            source: source.into(),
            origin: origin.into(),
        }
    }
}

/// Repeated costs of one solution on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    pub unit: CostUnit,
    pub runs: Vec<u64>,
    pub mean: f64,
    pub cv: f64,
}

impl CostProfile {
    pub fn from_runs(unit: CostUnit, runs: Vec<u64>) -> Result<Self, StatsError> {
        let as_f64: Vec<f64> = runs.iter().map(|&r| r as f64).collect();
        let mean = stats::mean(&as_f64)?;
        let cv = stats::stats_cv(&as_f64)?;
        Ok(CostProfile {
            unit,
            runs,
            mean,
            cv,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub solution: Solution,
    pub cumulative_ratio: f64,
    /// Mean cost measured at curation time; informational only.
    pub curation_mean_cost: f64,
}

/// Representative solutions ordered slow to fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub unit: CostUnit,
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceSet {
    pub fn new(unit: CostUnit, entries: Vec<ReferenceEntry>) -> Result<Self, InvariantError> {
        let set = ReferenceSet { unit, entries };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let bad = |m: String| Err(InvariantError::References(m));
        let Some(last) = self.entries.last() else {
            return bad("empty".into());
        };
        if last.cumulative_ratio != 1.0 {
            return bad(format!("last ratio is {}, not 1.0", last.cumulative_ratio));
        }
        let mut ids = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.cumulative_ratio > 0.0 && e.cumulative_ratio <= 1.0) {
                return bad(format!("ratio {} outside (0, 1]", e.cumulative_ratio));
            }
            if !ids.insert(e.solution.solution_id.as_str()) {
                return bad(format!("duplicate solution {}", e.solution.solution_id));
            }
            if i > 0 {
                let prev = &self.entries[i - 1];
                if e.cumulative_ratio <= prev.cumulative_ratio {
                    return bad(format!("ratios not strictly increasing at entry {i}"));
                }
                if e.curation_mean_cost >= prev.curation_mean_cost {
                    return bad(format!("curation costs not strictly decreasing at entry {i}"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.cumulative_ratio).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub instruction: String,
    pub entry_point: String,
    pub ground_truth: String,
    pub correctness_tests: Vec<TestCase>,
    pub perf_input: Option<Args>,
    pub references: Option<ReferenceSet>,
}

impl Task {
    pub fn ground_truth_solution(&self) -> Solution {
        Solution::new("ground_truth", self.ground_truth.clone(), "ground_truth")
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |reason: String| {
            Err(InvariantError::Task {
                task_id: self.task_id.clone(),
                reason,
            })
        };
        if self.task_id.is_empty() {
            return fail("empty task_id".into());
        }
        if self.entry_point.is_empty() {
            return fail("empty entry_point".into());
        }
        if let Some(refs) = &self.references {
            if self.perf_input.is_none() {
                return fail("references present without perf_input".into());
            }
            if let Err(e) = refs.validate() {
                return fail(e.to_string());
            }
        }
        Ok(())
    }

    /// Dataset split used for per-split pass@1: the task id prefix before
    /// the first `/` (`algo/3` → `algo`), or `default`.
    pub fn split(&self) -> String {
        split_of(&self.task_id)
    }
}

pub fn split_of(task_id: &str) -> String {
    match task_id.split_once('/') {
        Some((prefix, _)) if !prefix.is_empty() => prefix.to_string(),
        _ => "default".to_string(),
    }
}

/// Checks per-task invariants and id uniqueness across a suite.
pub fn validate_tasks(tasks: &[Task]) -> Result<(), InvariantError> {
    let mut seen = HashSet::new();
    for t in tasks {
        t.validate()?;
        if !seen.insert(t.task_id.as_str()) {
            return Err(InvariantError::Task {
                task_id: t.task_id.clone(),
                reason: "duplicate task_id".into(),
            });
        }
    }
    Ok(())
}
