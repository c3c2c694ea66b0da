//! Adaptive 1-D clustering of solutions by mean cost, and reference
//! ladder construction.
//!
//! Costs are sorted slow to fast and a boundary is placed after position
//! `i` when the relative drop `(t_i - t_{i+1}) / t_i` strictly exceeds
//! `bias + sqrt(w / t_i)`. The threshold is evaluated at the slower side.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CostUnit, InvariantError, ReferenceEntry, ReferenceSet, Solution};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cost must be positive and finite, got {0}")]
    NonPositiveCost(f64),
    #[error("nothing to cluster")]
    Empty,
    #[error("invalid cluster config: {0}")]
    Config(String),
    #[error("representative {0} is not among the solutions")]
    UnknownSolution(String),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub bias: f64,
    /// Threshold scale, in the unit of the costs.
    pub w: f64,
    pub min_clusters: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            bias: 0.2,
            w: 1e4,
            min_clusters: 4,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.bias >= 0.0) || !(self.w >= 0.0) || self.min_clusters < 2 {
            return Err(ClusterError::Config(format!(
                "need bias >= 0, w >= 0, K > 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfCluster {
    /// `(solution_id, mean_cost)`, slow to fast.
    pub members: Vec<(String, f64)>,
    pub representative: String,
    pub cumulative_ratio: f64,
}

/// `bias + sqrt(w / t)`.
pub fn adaptive_threshold(t: f64, config: &ClusterConfig) -> Result<f64, ClusterError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(ClusterError::NonPositiveCost(t));
    }
    Ok(config.bias + (config.w / t).sqrt())
}

/// Slow-to-fast order with ties broken by solution id.
fn slow_to_fast(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Clusters `(solution_id, mean_cost)` pairs.
pub fn cluster_costs(
    costs: &[(String, f64)],
    config: &ClusterConfig,
) -> Result<Vec<PerfCluster>, ClusterError> {
    if costs.is_empty() {
        return Err(ClusterError::Empty);
    }
    if let Some(&(_, bad)) = costs.iter().find(|(_, t)| !(*t > 0.0) || !t.is_finite()) {
        return Err(ClusterError::NonPositiveCost(bad));
    }
    let mut sorted = costs.to_vec();
    sorted.sort_by(slow_to_fast);
    let n = sorted.len();

    let mut groups: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for i in 0..n {
        groups.last_mut().expect("non-empty").push(sorted[i].clone());
        if i + 1 < n {
            let (t, next) = (sorted[i].1, sorted[i + 1].1);
            let delta = (t - next) / t;
            if delta > adaptive_threshold(t, config)? {
                groups.push(Vec::new());
            }
        }
    }

    let mut seen = 0usize;
    Ok(groups
        .into_iter()
        .map(|members| {
            seen += members.len();
            let cumulative_ratio = if seen == n { 1.0 } else { seen as f64 / n as f64 };
            PerfCluster {
                representative: members[0].0.clone(),
                members,
                cumulative_ratio,
            }
        })
        .collect())
}

/// Convenience for anonymous costs: ids are the input positions.
pub fn cluster_values(costs: &[f64], config: &ClusterConfig) -> Result<Vec<PerfCluster>, ClusterError> {
    let named: Vec<(String, f64)> = costs
        .iter()
        .enumerate()
        .map(|(i, &c)| (format!("{i:06}"), c))
        .collect();
    cluster_costs(&named, config)
}

/// One ladder entry per cluster: its slowest member.
pub fn build_reference_set(
    clusters: &[PerfCluster],
    solutions: &[Solution],
    unit: CostUnit,
) -> Result<ReferenceSet, ClusterError> {
    let by_id: HashMap<&str, &Solution> =
        solutions.iter().map(|s| (s.solution_id.as_str(), s)).collect();
    let entries = clusters
        .iter()
        .map(|c| {
            let sol = by_id
                .get(c.representative.as_str())
                .ok_or_else(|| ClusterError::UnknownSolution(c.representative.clone()))?;
            Ok(ReferenceEntry {
                solution: (*sol).clone(),
                cumulative_ratio: c.cumulative_ratio,
                curation_mean_cost: c.members[0].1,
            })
        })
        .collect::<Result<Vec<_>, ClusterError>>()?;
    Ok(ReferenceSet::new(unit, entries)?)
}
