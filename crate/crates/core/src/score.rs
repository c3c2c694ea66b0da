//! Differential performance scores against a reference ladder, pass@1,
//! dataset aggregation, pairwise comparison and the average-speedup
//! baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Aggregates, CostUnit, MetricSummary, ReferenceSet, ScoreReport};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("unit mismatch: references in {references}, candidate in {candidate}")]
    UnitMismatch {
        references: CostUnit,
        candidate: CostUnit,
    },
    #[error("empty reference ladder")]
    EmptyLadder,
    #[error("ladder has {costs} costs for {ratios} ratios")]
    LadderShape { costs: usize, ratios: usize },
    #[error("no task has a passing, scored sample")]
    EmptyAggregate,
    #[error("no samples to compute pass@1 over")]
    NoSamples,
    #[error("reports come from different suites ({a} vs {b})")]
    SuiteMismatch { a: String, b: String },
    #[error("no common passing task between the two reports")]
    EmptyCommonSet,
    #[error("average speedup needs positive costs (task {0})")]
    NonPositiveCost(usize),
    #[error("sample cap must be at least 1")]
    BadCap,
}

/// A reference ladder with costs re-measured in the current session,
/// ordered slow to fast like the [`ReferenceSet`] it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLadder {
    pub unit: CostUnit,
    pub costs: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl SessionLadder {
    pub fn new(unit: CostUnit, costs: Vec<f64>, ratios: Vec<f64>) -> Result<Self, ScoreError> {
        if costs.is_empty() {
            return Err(ScoreError::EmptyLadder);
        }
        if costs.len() != ratios.len() {
            return Err(ScoreError::LadderShape {
                costs: costs.len(),
                ratios: ratios.len(),
            });
        }
        Ok(SessionLadder { unit, costs, ratios })
    }

    pub fn from_references(
        refs: &ReferenceSet,
        unit: CostUnit,
        session_costs: Vec<f64>,
    ) -> Result<Self, ScoreError> {
        Self::new(unit, session_costs, refs.ratios())
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    fn check(&self, unit: CostUnit) -> Result<(), ScoreError> {
        if unit != self.unit {
            return Err(ScoreError::UnitMismatch {
                references: self.unit,
                candidate: unit,
            });
        }
        if self.costs.is_empty() {
            return Err(ScoreError::EmptyLadder);
        }
        Ok(())
    }
}

/// `100 · max({0} ∪ {r_i : t_i > t*})`. A reference with exactly the
/// candidate's cost does not count.
pub fn dps(ladder: &SessionLadder, t_star: f64, unit: CostUnit) -> Result<f64, ScoreError> {
    ladder.check(unit)?;
    let best = ladder
        .costs
        .iter()
        .zip(&ladder.ratios)
        .filter(|(&t, _)| t > t_star)
        .map(|(_, &r)| r)
        .fold(0.0, f64::max);
    Ok(100.0 * best)
}

/// Like [`dps`] with the ratio of entry `i` (1-based) replaced by `i/m`.
pub fn dps_norm(ladder: &SessionLadder, t_star: f64, unit: CostUnit) -> Result<f64, ScoreError> {
    ladder.check(unit)?;
    let m = ladder.len() as f64;
    let best = ladder
        .costs
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > t_star)
        .map(|(i, _)| (i + 1) as f64 / m)
        .fold(0.0, f64::max);
    Ok(100.0 * best)
}

/// Fraction of passing samples for one task.
pub fn pass_at_1(samples: &[bool]) -> Result<f64, ScoreError> {
    if samples.is_empty() {
        return Err(ScoreError::NoSamples);
    }
    Ok(samples.iter().filter(|&&p| p).count() as f64 / samples.len() as f64)
}

/// Mean of per-task pass@1 over tasks that have samples.
pub fn dataset_pass_at_1<'a>(
    tasks: impl IntoIterator<Item = &'a [bool]>,
) -> Result<f64, ScoreError> {
    let per_task: Vec<f64> = tasks
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(pass_at_1)
        .collect::<Result<_, _>>()?;
    if per_task.is_empty() {
        return Err(ScoreError::NoSamples);
    }
    Ok(per_task.iter().sum::<f64>() / per_task.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    Avg,
    Max,
    Min,
}

impl AggregateMode {
    fn apply(self, xs: &[f64]) -> f64 {
        match self {
            AggregateMode::Avg => xs.iter().sum::<f64>() / xs.len() as f64,
            AggregateMode::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            AggregateMode::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

impl FromStr for AggregateMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "avg" => Ok(Self::Avg),
            "max" => Ok(Self::Max),
            "min" => Ok(Self::Min),
            _ => Err(format!("unknown aggregate mode {s:?} (avg|max|min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dps,
    DpsNorm,
}

/// One candidate sample on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub solution_id: String,
    pub passed: bool,
    /// Sandbox status of the failing test or of profiling (`ok` otherwise).
    pub status: String,
    pub failed_test: Option<usize>,
    pub cost: Option<f64>,
    pub cv: Option<f64>,
    pub dps: Option<f64>,
    pub dps_norm: Option<f64>,
}

impl SampleScore {
    fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Dps => self.dps,
            Metric::DpsNorm => self.dps_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task_id: String,
    pub split: String,
    /// Session mean costs of the references, slow to fast.
    pub reference_costs: Vec<f64>,
    pub reference_ratios: Vec<f64>,
    pub samples: Vec<SampleScore>,
}

impl TaskEvaluation {
    pub fn pass_flags(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.passed).collect()
    }

    pub fn has_pass(&self) -> bool {
        self.samples.iter().any(|s| s.passed)
    }

    /// Scores of the first `cap` passing samples that were scored.
    pub fn capped_scores(&self, metric: Metric, cap: usize) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.passed)
            .take(cap)
            .filter_map(|s| s.metric(metric))
            .collect()
    }
}

/// Applies `mode` over each task's first `cap` passing samples, then
/// averages over tasks with at least one such sample.
pub fn aggregate_scores(
    evals: &[TaskEvaluation],
    metric: Metric,
    mode: AggregateMode,
    cap: usize,
) -> Result<f64, ScoreError> {
    if cap == 0 {
        return Err(ScoreError::BadCap);
    }
    let per_task: Vec<f64> = evals
        .iter()
        .map(|e| e.capped_scores(metric, cap))
        .filter(|s| !s.is_empty())
        .map(|s| mode.apply(&s))
        .collect();
    if per_task.is_empty() {
        return Err(ScoreError::EmptyAggregate);
    }
    Ok(per_task.iter().sum::<f64>() / per_task.len() as f64)
}

fn summary(evals: &[TaskEvaluation], metric: Metric, cap: usize) -> Option<MetricSummary> {
    let get = |mode| aggregate_scores(evals, metric, mode, cap).ok();
    Some(MetricSummary {
        avg: get(AggregateMode::Avg)?,
        max: get(AggregateMode::Max)?,
        min: get(AggregateMode::Min)?,
    })
}

/// Every dataset-level number a report carries, derived from its tasks.
pub fn compute_aggregates(evals: &[TaskEvaluation], cap: usize) -> Aggregates {
    let flags: Vec<Vec<bool>> = evals.iter().map(TaskEvaluation::pass_flags).collect();
    let mut by_split: BTreeMap<String, Vec<&[bool]>> = BTreeMap::new();
    for (e, f) in evals.iter().zip(&flags) {
        by_split.entry(e.split.clone()).or_default().push(f);
    }
    Aggregates {
        pass_at_1: dataset_pass_at_1(flags.iter().map(Vec::as_slice)).ok(),
        pass_at_1_by_split: by_split
            .into_iter()
            .filter_map(|(k, v)| dataset_pass_at_1(v).ok().map(|p| (k, p)))
            .collect(),
        scored_tasks: evals
            .iter()
            .filter(|e| !e.capped_scores(Metric::Dps, cap).is_empty())
            .count(),
        dps: summary(evals, Metric::Dps, cap),
        dps_norm: summary(evals, Metric::DpsNorm, cap),
    }
}

/// Both sides of a comparison restricted to the tasks both solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub label_a: String,
    pub label_b: String,
    pub common_tasks: Vec<String>,
    pub a: Aggregates,
    pub b: Aggregates,
}

pub fn pairwise_compare(
    a: &ScoreReport,
    b: &ScoreReport,
) -> Result<PairwiseComparison, ScoreError> {
    if a.provenance.suite_hash != b.provenance.suite_hash {
        return Err(ScoreError::SuiteMismatch {
            a: a.provenance.suite_hash.clone(),
            b: b.provenance.suite_hash.clone(),
        });
    }
    if a.provenance.unit != b.provenance.unit {
        return Err(ScoreError::UnitMismatch {
            references: a.provenance.unit,
            candidate: b.provenance.unit,
        });
    }
    let passing = |r: &ScoreReport| -> BTreeSet<String> {
        r.tasks
            .iter()
            .filter(|t| t.has_pass())
            .map(|t| t.task_id.clone())
            .collect()
    };
    let common: BTreeSet<String> = passing(a).intersection(&passing(b)).cloned().collect();
    if common.is_empty() {
        return Err(ScoreError::EmptyCommonSet);
    }
    let restrict = |r: &ScoreReport| -> Aggregates {
        let evals: Vec<TaskEvaluation> = r
            .tasks
            .iter()
            .filter(|t| common.contains(&t.task_id))
            .cloned()
            .collect();
        compute_aggregates(&evals, r.provenance.sample_cap)
    };
    Ok(PairwiseComparison {
        label_a: a.provenance.label.clone(),
        label_b: b.provenance.label.clone(),
        common_tasks: common.iter().cloned().collect(),
        a: restrict(a),
        b: restrict(b),
    })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

impl fmt::Display for PairwiseComparison {
    /// Aligned table; every cell shows `A / B`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |x: Option<f64>| x.map(|v| 100.0 * v);
        let pick = |agg: &Aggregates, metric: Metric, mode: AggregateMode| {
            let s = match metric {
                Metric::Dps => agg.dps.as_ref(),
                Metric::DpsNorm => agg.dps_norm.as_ref(),
            };
            s.map(|s| match mode {
                AggregateMode::Avg => s.avg,
                AggregateMode::Max => s.max,
                AggregateMode::Min => s.min,
            })
        };
        let mut rows: Vec<(String, String)> = vec![(
            "pass@1".into(),
            format!("{} / {}", cell(pct(self.a.pass_at_1)), cell(pct(self.b.pass_at_1))),
        )];
        for (metric, name) in [(Metric::Dps, "DPS"), (Metric::DpsNorm, "DPS_norm")] {
            for (mode, m) in [
                (AggregateMode::Avg, "avg"),
                (AggregateMode::Max, "max"),
                (AggregateMode::Min, "min"),
            ] {
                rows.push((
                    format!("{name} ({m})"),
                    format!(
                        "{} / {}",
                        cell(pick(&self.a, metric, mode)),
                        cell(pick(&self.b, metric, mode))
                    ),
                ));
            }
        }
        let header = format!("{} / {}", self.label_a, self.label_b);
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(header.len());
        let mut out = String::new();
        writeln!(out, "common tasks: {}", self.common_tasks.len())?;
        writeln!(out, "{:<w0$}  {:>w1$}", "metric", header)?;
        writeln!(out, "{}  {}", "-".repeat(w0), "-".repeat(w1))?;
        for (k, v) in rows {
            writeln!(out, "{k:<w0$}  {v:>w1$}")?;
        }
        f.write_str(&out)
    }
}

/// Mean of per-task `baseline / candidate`. Reported as a diagnostic only:
/// a single outlier task can dominate it.
pub fn avg_speedup(pairs: &[(f64, f64)]) -> Result<f64, ScoreError> {
    if pairs.is_empty() {
        return Err(ScoreError::NoSamples);
    }
    let mut total = 0.0;
    for (i, &(base, cand)) in pairs.iter().enumerate() {
        if !(base > 0.0 && cand > 0.0) {
            return Err(ScoreError::NonPositiveCost(i));
        }
        total += base / cand;
    }
    Ok(total / pairs.len() as f64)
}
