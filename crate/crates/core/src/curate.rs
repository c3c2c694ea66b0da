//! Suite curation: validate candidate solutions, synthesize input
//! generators, grow inputs by exponential scale search, profile, filter and
//! cluster into reference ladders.
//!
//! Per-task failures never abort a batch; they are recorded in the curation
//! log and the task is rejected.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{build_reference_set, cluster_costs, ClusterConfig, ClusterError};
use crate::llmgen::{build_prompt, GeneratorSampler, LlmError, Template};
use crate::measure::{self, stats, CostProfile, MeasureConfig, MeasureError};
use crate::model::{CostUnit, Solution, Task};
use crate::sandbox::{Limits, RunStatus, Sandbox};
use crate::value::Args;

#[derive(Debug, Error)]
pub enum CurateError {
    #[error("all generator probes are dead")]
    AllProbesDead,
    #[error("no profile for solution {0}")]
    MissingProfile(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("invalid curation config: {0}")]
    Config(String),
}

/// How the cluster count is compared against K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterComparator {
    AtLeast,
    MoreThan,
}

impl ClusterComparator {
    pub fn accepts(self, clusters: usize, k: usize) -> bool {
        match self {
            ClusterComparator::AtLeast => clusters >= k,
            ClusterComparator::MoreThan => clusters > k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    /// Minimum mean cost of the fastest solution (exclusive).
    pub t_thresh: f64,
    /// P99 of per-solution CVs must stay below this; wall-time mode only.
    pub cv_thresh: f64,
    pub cluster: ClusterConfig,
    pub cluster_comparator: ClusterComparator,
    pub limits: Limits,
    pub generator_samples: usize,
    pub generator_temperature: f64,
    pub scale_start: u64,
    /// Hard stop for scale search, in doublings.
    pub max_scale_rounds: u32,
    /// Stop scale search once the generator's output stops changing.
    pub stop_on_plateau: bool,
    pub min_valid_solutions: usize,
    pub measure: MeasureConfig,
    /// Tasks curated concurrently (and so LLM requests in flight).
    pub concurrency: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            t_thresh: 10_000.0,
            cv_thresh: 0.05,
            cluster: ClusterConfig::default(),
            cluster_comparator: ClusterComparator::AtLeast,
            limits: Limits::default(),
            generator_samples: 16,
            generator_temperature: 0.8,
            scale_start: 2,
            max_scale_rounds: 30,
            stop_on_plateau: true,
            min_valid_solutions: 10,
            measure: MeasureConfig::instructions(),
            concurrency: 4,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurateError> {
        let bad = |m: &str| Err(CurateError::Config(m.to_string()));
        if !(self.t_thresh > 0.0) || !(self.cv_thresh > 0.0) {
            return bad("thresholds must be positive");
        }
        if self.generator_samples == 0 || self.scale_start == 0 || self.max_scale_rounds == 0 {
            return bad("generator_samples, scale_start and max_scale_rounds must be positive");
        }
        if self.min_valid_solutions == 0 || self.concurrency == 0 {
            return bad("min_valid_solutions and concurrency must be positive");
        }
        self.cluster.validate()?;
        self.limits
            .validate()
            .map_err(|e| CurateError::Config(e.to_string()))?;
        self.measure.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedSolution {
    pub solution_id: String,
    pub status: RunStatus,
    pub failed_test: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Validation {
    pub valid: Vec<Solution>,
    pub rejected: Vec<RejectedSolution>,
}

/// Keeps the candidates that pass every correctness test, in input order.
pub fn validate_solutions(
    sandbox: &Sandbox,
    task: &Task,
    candidates: &[Solution],
    limits: &Limits,
) -> Validation {
    let reports: Vec<_> = candidates
        .par_iter()
        .map(|c| sandbox.check_correct(c, &task.entry_point, &task.correctness_tests, limits))
        .collect();
    let mut out = Validation::default();
    for (cand, report) in candidates.iter().zip(reports) {
        if report.passed {
            out.valid.push(cand.clone());
        } else {
            let (status, detail) = match report.failure() {
                Some(f) => (f.status, f.detail.clone()),
                None => (RunStatus::Crash, "no correctness tests".to_string()),
            };
            out.rejected.push(RejectedSolution {
                solution_id: cand.solution_id.clone(),
                status,
                failed_test: report.first_failure,
                detail,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleOutcome {
    Survived,
    GeneratorFailed { status: RunStatus, detail: String },
    SolutionFailed { solution_id: String, status: RunStatus, detail: String },
    /// Same input as the previous scale; growing further is pointless.
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStep {
    pub scale: u64,
    pub outcome: ScaleOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProbe {
    pub generator_source: String,
    pub scale_trace: Vec<ScaleStep>,
    pub best_input: Option<Args>,
    pub best_scale: Option<u64>,
}

impl GeneratorProbe {
    pub fn dead(source: &str) -> Self {
        GeneratorProbe {
            generator_source: source.to_string(),
            scale_trace: Vec::new(),
            best_input: None,
            best_scale: None,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.best_input.is_some()
    }

    pub fn generator_hash(&self) -> String {
        hex::encode(Sha256::digest(self.generator_source.as_bytes()))
    }
}

/// Runs the generator at `scale_start · 2^j` until a solution or the
/// generator fails; the best input is the last scale every solution survived.
pub fn scale_search(
    sandbox: &Sandbox,
    task: &Task,
    generator: &str,
    valid: &[Solution],
    config: &CurationConfig,
) -> GeneratorProbe {
    let mut probe = GeneratorProbe::dead(generator);
    let mut scale = config.scale_start;
    let mut last_encoded: Option<String> = None;
    for _ in 0..config.max_scale_rounds {
        let input = match sandbox.generate(generator, scale, &config.limits) {
            Ok(input) => input,
            Err(outcome) => {
                probe.scale_trace.push(ScaleStep {
                    scale,
                    outcome: ScaleOutcome::GeneratorFailed {
                        status: outcome.status,
                        detail: outcome.describe(),
                    },
                });
                break;
            }
        };
        let encoded = input.encode();
        if config.stop_on_plateau && last_encoded.as_deref() == Some(encoded.as_str()) {
            probe.scale_trace.push(ScaleStep {
                scale,
                outcome: ScaleOutcome::Plateau,
            });
            break;
        }
        let failure = valid
            .par_iter()
            .map(|s| (s, sandbox.run_guest(s, &task.entry_point, &input, &config.limits)))
            .find_first(|(_, o)| o.status != RunStatus::Ok);
        match failure {
            Some((s, outcome)) => {
                probe.scale_trace.push(ScaleStep {
                    scale,
                    outcome: ScaleOutcome::SolutionFailed {
                        solution_id: s.solution_id.clone(),
                        status: outcome.status,
                        detail: outcome.describe(),
                    },
                });
                break;
            }
            None => {
                probe.scale_trace.push(ScaleStep {
                    scale,
                    outcome: ScaleOutcome::Survived,
                });
                probe.best_input = Some(input);
                probe.best_scale = Some(scale);
                last_encoded = Some(encoded);
            }
        }
        match scale.checked_mul(2) {
            Some(next) => scale = next,
            None => break,
        }
    }
    probe
}

/// Picks the probe whose input maximizes the cheapest solution's cost.
/// `min_costs[i]` is that minimum for probe `i` (None when unusable). Ties go
/// to the smaller serialized input, then the smaller generator hash.
pub fn pick_probe(probes: &[GeneratorProbe], min_costs: &[Option<f64>]) -> Result<usize, CurateError> {
    let key = |i: usize| {
        let size = probes[i].best_input.as_ref().map_or(usize::MAX, |a| a.encode().len());
        (size, probes[i].generator_hash())
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, cost) in min_costs.iter().enumerate() {
        let Some(cost) = *cost else { continue };
        if !probes[i].is_alive() {
            continue;
        }
        best = match best {
            None => Some((i, cost)),
            Some((j, c)) if cost > c || (cost == c && key(i) < key(j)) => Some((i, cost)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i).ok_or(CurateError::AllProbesDead)
}

/// A probe chosen by [`select_probe`], with the single-run costs that
/// decided it.
#[derive(Debug, Clone)]
pub struct SelectedProbe {
    pub index: usize,
    pub min_cost: f64,
    /// First-repetition costs of every valid solution on the winning input.
    pub first_runs: BTreeMap<String, u64>,
}

/// Measures every live probe's best input once per solution and applies
/// [`pick_probe`]. Probes with identical inputs are measured once.
pub fn select_probe(
    sandbox: &Sandbox,
    task: &Task,
    probes: &[GeneratorProbe],
    valid: &[Solution],
    config: &CurationConfig,
) -> Result<SelectedProbe, CurateError> {
    let single = config.measure.clone().with_repetitions(1);
    let mut by_input: HashMap<String, Option<BTreeMap<String, u64>>> = HashMap::new();
    let mut min_costs = Vec::with_capacity(probes.len());
    for probe in probes {
        let Some(input) = &probe.best_input else {
            min_costs.push(None);
            continue;
        };
        let encoded = input.encode();
        if !by_input.contains_key(&encoded) {
            let runs: Result<BTreeMap<String, u64>, CurateError> = valid
                .par_iter()
                .map(|s| {
                    let p = measure::profile(sandbox, s, &task.entry_point, input, &config.limits, &single)?;
                    Ok((s.solution_id.clone(), p.runs[0]))
                })
                .collect();
            let runs = match runs {
                Ok(r) => Some(r),
                // A counter that cannot be opened is fatal for every probe.
                Err(CurateError::Measure(e @ (MeasureError::CounterUnavailable(_)
                | MeasureError::Permission { .. }))) => return Err(e.into()),
                Err(e) => {
                    log::debug!("probe input unusable: {e}");
                    None
                }
            };
            by_input.insert(encoded.clone(), runs);
        }
        min_costs.push(
            by_input[&encoded]
                .as_ref()
                .and_then(|r| r.values().min().map(|&c| c as f64)),
        );
    }
    let index = pick_probe(probes, &min_costs)?;
    let encoded = probes[index].best_input.as_ref().expect("alive").encode();
    Ok(SelectedProbe {
        index,
        min_cost: min_costs[index].expect("picked probes have costs"),
        first_runs: by_input[&encoded].clone().expect("picked probes were measured"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum RejectReason {
    NoTests,
    TooFewSolutions { valid: usize, required: usize },
    Llm { detail: String },
    NoLiveProbe,
    Profiling { detail: String },
    Computation { min_mean: f64, t_thresh: f64 },
    Variation { p99_cv: f64, cv_thresh: f64 },
    Diversity { clusters: usize, required: usize },
    Internal { detail: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoTests => write!(f, "no correctness tests"),
            RejectReason::TooFewSolutions { valid, required } => {
                write!(f, "too few valid solutions ({valid} < {required})")
            }
            RejectReason::Llm { detail } => write!(f, "generator synthesis failed: {detail}"),
            RejectReason::NoLiveProbe => write!(f, "no generator survived scale search"),
            RejectReason::Profiling { detail } => write!(f, "profiling failed: {detail}"),
            RejectReason::Computation { min_mean, t_thresh } => {
                write!(f, "computation: min mean cost {min_mean} <= {t_thresh}")
            }
            RejectReason::Variation { p99_cv, cv_thresh } => {
                write!(f, "variation: P99 CV {p99_cv:.4} >= {cv_thresh}")
            }
            RejectReason::Diversity { clusters, required } => {
                write!(f, "diversity: {clusters} clusters, need {required}")
            }
            RejectReason::Internal { detail } => write!(f, "internal: {detail}"),
        }
    }
}

impl RejectReason {
    pub fn name(&self) -> &'static str {
        match self {
            RejectReason::NoTests => "no_tests",
            RejectReason::TooFewSolutions { .. } => "too_few_solutions",
            RejectReason::Llm { .. } => "llm",
            RejectReason::NoLiveProbe => "no_live_probe",
            RejectReason::Profiling { .. } => "profiling",
            RejectReason::Computation { .. } => "computation",
            RejectReason::Variation { .. } => "variation",
            RejectReason::Diversity { .. } => "diversity",
            RejectReason::Internal { .. } => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterVerdict {
    pub keep: bool,
    pub reasons: Vec<RejectReason>,
    pub clusters: usize,
}

/// Applies the computation, variation (wall time only) and diversity
/// criteria. Every failing criterion is listed.
pub fn filter_task(
    valid: &[Solution],
    profiles: &BTreeMap<String, CostProfile>,
    config: &CurationConfig,
) -> Result<FilterVerdict, CurateError> {
    let mut reasons = Vec::new();
    if valid.len() < config.min_valid_solutions {
        reasons.push(RejectReason::TooFewSolutions {
            valid: valid.len(),
            required: config.min_valid_solutions,
        });
    }
    let mut means = Vec::with_capacity(valid.len());
    let mut cvs = Vec::with_capacity(valid.len());
    for s in valid {
        let p = profiles
            .get(&s.solution_id)
            .ok_or_else(|| CurateError::MissingProfile(s.solution_id.clone()))?;
        means.push((s.solution_id.clone(), p.mean));
        cvs.push(p.cv);
    }
    if means.is_empty() {
        return Ok(FilterVerdict {
            keep: false,
            reasons,
            clusters: 0,
        });
    }
    let min_mean = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    if !(min_mean > config.t_thresh) {
        reasons.push(RejectReason::Computation {
            min_mean,
            t_thresh: config.t_thresh,
        });
    }
    if config.measure.unit == CostUnit::WallNs {
        let p99 = stats::percentile_nearest_rank(&cvs, 99.0).map_err(MeasureError::from)?;
        if !(p99 < config.cv_thresh) {
            reasons.push(RejectReason::Variation {
                p99_cv: p99,
                cv_thresh: config.cv_thresh,
            });
        }
    }
    let clusters = cluster_costs(&means, &config.cluster)?.len();
    if !config
        .cluster_comparator
        .accepts(clusters, config.cluster.min_clusters)
    {
        reasons.push(RejectReason::Diversity {
            clusters,
            required: config.cluster.min_clusters,
        });
    }
    Ok(FilterVerdict {
        keep: reasons.is_empty(),
        reasons,
        clusters,
    })
}

/// One line of the curation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationEvent {
    pub task_id: String,
    pub stage: String,
    pub outcome: String,
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub solution_id: String,
    pub mean: f64,
    pub cv: f64,
    pub runs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskVerdict {
    Curated(Task),
    Rejected(Vec<RejectReason>),
}

#[derive(Debug, Clone)]
pub struct TaskCuration {
    pub task_id: String,
    pub verdict: TaskVerdict,
    pub events: Vec<CurationEvent>,
}

#[derive(Debug, Clone, Default)]
pub struct CurationResult {
    pub curated: Vec<Task>,
    pub rejected: Vec<(String, Vec<RejectReason>)>,
    pub events: Vec<CurationEvent>,
}

impl CurationResult {
    /// Writes the events as JSON lines.
    pub fn write_log(&self, out: &mut impl Write) -> std::io::Result<()> {
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e).expect("event serializes"))?;
        }
        Ok(())
    }
}

struct Events<'a> {
    task_id: &'a str,
    list: Vec<CurationEvent>,
}

impl Events<'_> {
    fn push(&mut self, stage: &str, outcome: &str, reason: Option<String>, data: serde_json::Value) {
        self.list.push(CurationEvent {
            task_id: self.task_id.to_string(),
            stage: stage.into(),
            outcome: outcome.into(),
            reason,
            data,
        });
    }

    fn reject(&mut self, stage: &str, reasons: Vec<RejectReason>) -> TaskVerdict {
        let names = reasons.iter().map(RejectReason::name).collect::<Vec<_>>().join(",");
        let text = reasons.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        self.push(
            stage,
            "rejected",
            Some(names),
            serde_json::json!({"detail": text, "reasons": reasons}),
        );
        TaskVerdict::Rejected(reasons)
    }
}

/// Everything one curation run needs besides the tasks.
pub struct Curator<'a> {
    pub sandbox: &'a Sandbox,
    pub sampler: &'a GeneratorSampler,
    pub template: &'a Template,
    pub config: &'a CurationConfig,
}

impl Curator<'_> {
    /// Candidate pool for a task: its pool plus the ground truth (unless
    /// the pool already has a solution with that id).
    fn candidates(task: &Task, pool: &[Solution]) -> Vec<Solution> {
        let gt = task.ground_truth_solution();
        let mut all = Vec::with_capacity(pool.len() + 1);
        if !pool.iter().any(|s| s.solution_id == gt.solution_id) {
            all.push(gt);
        }
        all.extend(pool.iter().cloned());
        all
    }

    pub fn curate_task(&self, task: &Task, pool: &[Solution]) -> TaskCuration {
        let mut ev = Events {
            task_id: &task.task_id,
            list: Vec::new(),
        };
        let verdict = self.run_pipeline(task, pool, &mut ev);
        if let TaskVerdict::Curated(t) = &verdict {
            let refs = t.references.as_ref().expect("curated tasks have references");
            ev.push(
                "curated",
                "kept",
                None,
                serde_json::json!({"references": refs.len()}),
            );
        }
        TaskCuration {
            task_id: task.task_id.clone(),
            verdict,
            events: ev.list,
        }
    }

    fn run_pipeline(&self, task: &Task, pool: &[Solution], ev: &mut Events) -> TaskVerdict {
        let cfg = self.config;
        if task.correctness_tests.is_empty() {
            return ev.reject("validate", vec![RejectReason::NoTests]);
        }
        let validation = validate_solutions(self.sandbox, task, &Self::candidates(task, pool), &cfg.limits);
        ev.push(
            "validate",
            "done",
            None,
            serde_json::json!({
                "valid": validation.valid.iter().map(|s| &s.solution_id).collect::<Vec<_>>(),
                "rejected": validation.rejected,
            }),
        );
        let valid = validation.valid;
        if valid.len() < cfg.min_valid_solutions {
            return ev.reject(
                "validate",
                vec![RejectReason::TooFewSolutions {
                    valid: valid.len(),
                    required: cfg.min_valid_solutions,
                }],
            );
        }

        let candidates = build_prompt(task, self.template).and_then(|prompt| {
            self.sampler
                .sample_generators(&prompt, cfg.generator_samples, cfg.generator_temperature)
        });
        let candidates = match candidates {
            Ok(c) => c,
            Err(e) => {
                return ev.reject("synthesize", vec![RejectReason::Llm { detail: e.to_string() }])
            }
        };
        ev.push(
            "synthesize",
            "done",
            None,
            serde_json::json!({
                "samples": candidates.len(),
                "parsed": candidates.iter().filter(|c| c.parse_ok).count(),
            }),
        );

        let probes: Vec<GeneratorProbe> = candidates
            .iter()
            .map(|c| {
                if c.parse_ok {
                    scale_search(self.sandbox, task, &c.extracted_code, &valid, cfg)
                } else {
                    GeneratorProbe::dead(&c.extracted_code)
                }
            })
            .collect();
        for (i, p) in probes.iter().enumerate() {
            ev.push(
                "scale_search",
                if p.is_alive() { "alive" } else { "dead" },
                None,
                serde_json::json!({
                    "probe": i,
                    "best_scale": p.best_scale,
                    "trace": p.scale_trace,
                }),
            );
        }

        let selected = match select_probe(self.sandbox, task, &probes, &valid, cfg) {
            Ok(s) => s,
            Err(CurateError::AllProbesDead) => {
                return ev.reject("select", vec![RejectReason::NoLiveProbe])
            }
            Err(e) => {
                return ev.reject("select", vec![RejectReason::Profiling { detail: e.to_string() }])
            }
        };
        let probe = &probes[selected.index];
        let input = probe.best_input.clone().expect("selected probe is alive");
        ev.push(
            "select",
            "done",
            None,
            serde_json::json!({
                "probe": selected.index,
                "min_cost": selected.min_cost,
                "best_scale": probe.best_scale,
                "generator_sha256": probe.generator_hash(),
            }),
        );

        let profiles = match self.profile_all(task, &valid, &input, &selected) {
            Ok(p) => p,
            Err(e) => {
                return ev.reject("profile", vec![RejectReason::Profiling { detail: e.to_string() }])
            }
        };
        ev.push(
            "profile",
            "profiled",
            None,
            serde_json::json!({
                "unit": cfg.measure.unit,
                "solutions": valid.iter().map(|s| {
                    let p = &profiles[&s.solution_id];
                    ProfileSummary { solution_id: s.solution_id.clone(), mean: p.mean, cv: p.cv, runs: p.runs.clone() }
                }).collect::<Vec<_>>(),
            }),
        );

        let verdict = match filter_task(&valid, &profiles, cfg) {
            Ok(v) => v,
            Err(e) => return ev.reject("filter", vec![RejectReason::Internal { detail: e.to_string() }]),
        };
        if !verdict.keep {
            return ev.reject("filter", verdict.reasons);
        }
        ev.push("filter", "passed", None, serde_json::json!({"clusters": verdict.clusters}));

        let means: Vec<(String, f64)> = valid
            .iter()
            .map(|s| (s.solution_id.clone(), profiles[&s.solution_id].mean))
            .collect();
        let refs = cluster_costs(&means, &cfg.cluster)
            .map_err(CurateError::from)
            .and_then(|c| Ok(build_reference_set(&c, &valid, cfg.measure.unit)?));
        match refs {
            Ok(refs) => {
                let mut curated = task.clone();
                curated.perf_input = Some(input);
                curated.references = Some(refs);
                TaskVerdict::Curated(curated)
            }
            Err(e) => ev.reject("cluster", vec![RejectReason::Internal { detail: e.to_string() }]),
        }
    }

    /// Full-repetition profiles on the chosen input, reusing the selection
    /// run as the first repetition.
    fn profile_all(
        &self,
        task: &Task,
        valid: &[Solution],
        input: &Args,
        selected: &SelectedProbe,
    ) -> Result<BTreeMap<String, CostProfile>, CurateError> {
        let cfg = self.config;
        let remaining = cfg.measure.repetitions.saturating_sub(1);
        valid
            .par_iter()
            .map(|s| {
                let mut runs = vec![*selected
                    .first_runs
                    .get(&s.solution_id)
                    .ok_or_else(|| CurateError::MissingProfile(s.solution_id.clone()))?];
                if remaining > 0 {
                    let more = cfg.measure.clone().with_repetitions(remaining);
                    let p = measure::profile(self.sandbox, s, &task.entry_point, input, &cfg.limits, &more)?;
                    runs.extend(p.runs);
                }
                let profile = CostProfile::from_runs(cfg.measure.unit, runs).map_err(MeasureError::from)?;
                Ok((s.solution_id.clone(), profile))
            })
            .collect()
    }

    /// Curates every task; the output keeps input order.
    pub fn curate_suite(
        &self,
        tasks: &[Task],
        pools: &BTreeMap<String, Vec<Solution>>,
    ) -> Result<CurationResult, CurateError> {
        self.config.validate()?;
        let empty = Vec::new();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.concurrency)
            .build()
            .map_err(|e| CurateError::Config(e.to_string()))?;
        let per_task: Vec<TaskCuration> = pool.install(|| {
            tasks
                .par_iter()
                .map(|t| self.curate_task(t, pools.get(&t.task_id).unwrap_or(&empty)))
                .collect()
        });
        let mut result = CurationResult::default();
        for tc in per_task {
            result.events.extend(tc.events);
            match tc.verdict {
                TaskVerdict::Curated(t) => result.curated.push(t),
                TaskVerdict::Rejected(r) => result.rejected.push((tc.task_id, r)),
            }
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn probe(src: &str, input_len: usize) -> GeneratorProbe {
        GeneratorProbe {
            generator_source: src.into(),
            scale_trace: vec![],
            best_input: Some(Args(vec![Value::List(vec![Value::int(0); input_len])])),
            best_scale: Some(2),
        }
    }

    #[test]
    fn pick_probe_prefers_max_min_cost() {
        let probes = vec![probe("a", 3), probe("b", 3)];
        assert_eq!(pick_probe(&probes, &[Some(1e6), Some(1e7)]).unwrap(), 1);
        assert_eq!(pick_probe(&probes[..1], &[Some(5.0)]).unwrap(), 0);
        assert!(matches!(
            pick_probe(&[GeneratorProbe::dead("x")], &[None]),
            Err(CurateError::AllProbesDead)
        ));
    }

    #[test]
    fn pick_probe_tie_breaks() {
        let small_then_big = vec![probe("a", 10), probe("b", 2)];
        assert_eq!(pick_probe(&small_then_big, &[Some(7.0), Some(7.0)]).unwrap(), 1);
        let same_size = vec![probe("zzz", 2), probe("aaa", 2)];
        let hashes: Vec<String> = same_size.iter().map(GeneratorProbe::generator_hash).collect();
        let expected = if hashes[0] < hashes[1] { 0 } else { 1 };
        assert_eq!(pick_probe(&same_size, &[Some(7.0), Some(7.0)]).unwrap(), expected);
    }

    fn profiles(costs: &[f64], cv: f64) -> (Vec<Solution>, BTreeMap<String, CostProfile>) {
        let sols: Vec<Solution> = (0..costs.len())
            .map(|i| Solution::new(format!("s{i:02}"), "", ""))
            .collect();
        let map = sols
            .iter()
            .zip(costs)
            .map(|(s, &c)| {
                (
                    s.solution_id.clone(),
                    CostProfile {
                        unit: CostUnit::Instructions,
                        runs: vec![c as u64],
                        mean: c,
                        cv,
                    },
                )
            })
            .collect();
        (sols, map)
    }

    #[test]
    fn filter_criteria() {
        let cfg = CurationConfig::default();
        let (s, p) = profiles(&[1e9; 10], 0.0);
        let v = filter_task(&s, &p, &cfg).unwrap();
        assert!(!v.keep);
        assert_eq!(v.reasons.iter().map(RejectReason::name).collect::<Vec<_>>(), vec!["diversity"]);

        let tiers: Vec<f64> = (0..10).map(|i| [2.5e6, 7e5, 2e5, 6e4][i % 4] * (1.0 + i as f64 * 1e-4)).collect();
        let (s, p) = profiles(&tiers, 0.0);
        assert!(filter_task(&s, &p, &cfg).unwrap().keep);

        let small: Vec<f64> = tiers.iter().map(|t| t / 12.0).collect();
        let (s, p) = profiles(&small, 0.0);
        let v = filter_task(&s, &p, &cfg).unwrap();
        assert!(v.reasons.iter().any(|r| r.name() == "computation"), "{:?}", v.reasons);

        // Variation only matters in wall-time mode.
        let (s, p) = profiles(&tiers, 0.5);
        assert!(filter_task(&s, &p, &cfg).unwrap().keep);
        let wall = CurationConfig {
            measure: MeasureConfig::wall(),
            ..CurationConfig::default()
        };
        let v = filter_task(&s, &p, &wall).unwrap();
        assert_eq!(v.reasons.iter().map(RejectReason::name).collect::<Vec<_>>(), vec!["variation"]);

        let (s, mut p) = profiles(&tiers, 0.0);
        p.remove("s03");
        assert!(matches!(filter_task(&s, &p, &cfg), Err(CurateError::MissingProfile(_))));
    }

    #[test]
    fn comparator() {
        assert!(ClusterComparator::AtLeast.accepts(4, 4));
        assert!(!ClusterComparator::MoreThan.accepts(4, 4));
        assert!(ClusterComparator::MoreThan.accepts(5, 4));
    }
}
