//! The `dpe` command line.
//!
//! Exit statuses: 0 success, 1 fatal error, 2 empty result (nothing curated,
//! nothing scored, no rows).
//!
//! Settings come from flags, then the `--config` file, then built-in
//! defaults. The config file is flat TOML:
//!
//! ```toml
//! runner = "python3 runner.py"
//! unit = "instructions"      # or "wall"
//! reps = 3
//! counter = "auto"           # auto | perf | callgrind
//! samples = 10
//! wall_timeout_s = 20.0
//! memory_cap_bytes = 17179869184
//! t_thresh = 10000.0
//! bias = 0.2
//! w = 10000.0
//! min_clusters = 4
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args as ClapArgs, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use crate::curate::{ClusterComparator, CurationConfig, Curator};
use crate::llmgen::{Endpoint, GeneratorSampler, Template};
use crate::measure::{self, CounterBackend, MachineFingerprint, MeasureConfig};
use crate::model::{self, CostUnit, Provenance, ScoreReport, Solution, Task};
use crate::sandbox::{GuestRunner, Limits, Sandbox};
use crate::score::{self, SampleScore, SessionLadder, TaskEvaluation};
use crate::value::Args;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FATAL: u8 = 1;
pub const EXIT_EMPTY: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "dpe", version, about = "Differential performance evaluation for code benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curate a suite from tasks, solution pools and synthesized generators.
    Curate(CurateArgs),
    /// Score candidate solutions against a curated suite.
    Evaluate(EvaluateArgs),
    /// Print report aggregates, or compare two reports.
    Report(ReportArgs),
    /// Wall-time variation of every reference solution (CSV).
    VariationStudy(VariationArgs),
    /// Profile one solution on one input.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitFlag {
    Instructions,
    Wall,
}

impl From<UnitFlag> for CostUnit {
    fn from(u: UnitFlag) -> Self {
        match u {
            UnitFlag::Instructions => CostUnit::Instructions,
            UnitFlag::Wall => CostUnit::WallNs,
        }
    }
}

/// Flags shared by every command that runs guests.
#[derive(Debug, Clone, ClapArgs)]
pub struct RunFlags {
    /// Guest runner command (`<runner> <solution> <entry> <input>`).
    #[arg(long)]
    pub runner: Option<String>,
    /// Measurement unit.
    #[arg(long, value_enum)]
    pub unit: Option<UnitFlag>,
    /// Repetitions per profile.
    #[arg(long)]
    pub reps: Option<u32>,
    /// Instruction counter backend: auto, perf or callgrind.
    #[arg(long)]
    pub counter: Option<CounterBackend>,
    /// Wall-clock limit per guest run, in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Flat TOML config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, ClapArgs)]
pub struct CurateArgs {
    /// Input tasks: a suite directory or its suite.jsonl.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Solution pools (JSONL of task_id, solution_id, source, origin).
    #[arg(long)]
    pub solutions: PathBuf,
    /// Output suite directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Curation log path (default: <out>/curation_log.jsonl).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Serve completions from this transcript instead of the network.
    #[arg(long)]
    pub replay_transcript: Option<PathBuf>,
    /// Append live completions to this transcript.
    #[arg(long)]
    pub record_transcript: Option<PathBuf>,
    /// Prompt template (default: the bundled one).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Model name sent to the endpoint (part of the transcript key).
    #[arg(long)]
    pub model: Option<String>,
    /// Generator samples per task.
    #[arg(long)]
    pub generator_samples: Option<usize>,
    /// Check every test's expected value against the ground truth first.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, ClapArgs)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// Candidate samples (JSONL of task_id, solution_id, source, origin).
    #[arg(long)]
    pub candidates: PathBuf,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Passing samples scored per task.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Name of the evaluated model, stored in the report.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, ClapArgs)]
pub struct ReportArgs {
    /// Report files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Compare exactly two reports on their common passing tasks.
    #[arg(long)]
    pub pairwise: bool,
}

#[derive(Debug, Clone, ClapArgs)]
pub struct VariationArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// CSV path; decade buckets go to `<stem>.buckets.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, ClapArgs)]
pub struct ProfileArgs {
    /// Solution source file.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub entry_point: String,
    /// Encoded argument list.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

/// Contents of the `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub runner: Option<String>,
    pub unit: Option<UnitFlag>,
    pub reps: Option<u32>,
    pub counter: Option<String>,
    pub cpu_pin: Option<usize>,
    pub count_kernel: Option<bool>,
    pub samples: Option<usize>,
    pub label: Option<String>,
    pub wall_timeout_s: Option<f64>,
    pub memory_cap_bytes: Option<u64>,
    pub output_cap_bytes: Option<u64>,
    pub t_thresh: Option<f64>,
    pub cv_thresh: Option<f64>,
    pub bias: Option<f64>,
    pub w: Option<f64>,
    pub min_clusters: Option<usize>,
    pub cluster_comparator: Option<ClusterComparator>,
    pub generator_samples: Option<usize>,
    pub generator_temperature: Option<f64>,
    pub scale_start: Option<u64>,
    pub max_scale_rounds: Option<u32>,
    pub stop_on_plateau: Option<bool>,
    pub min_valid_solutions: Option<usize>,
    pub concurrency: Option<usize>,
    pub model: Option<String>,
    pub template: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
        }
    }
}

/// Everything needed to run and measure guests, after precedence.
struct RunSetup {
    sandbox: Sandbox,
    measure: MeasureConfig,
    limits: Limits,
    file: ConfigFile,
}

fn run_setup(flags: &RunFlags) -> Result<RunSetup, String> {
    let file = ConfigFile::load(flags.config.as_deref())?;
    let runner = flags
        .runner
        .clone()
        .or_else(|| file.runner.clone())
        .ok_or("no guest runner: pass --runner or set `runner` in the config file")?;
    let runner = GuestRunner::parse(&runner).map_err(|e| e.to_string())?;
    let unit: CostUnit = flags.unit.or(file.unit).unwrap_or(UnitFlag::Instructions).into();
    let mut measure = MeasureConfig::new(unit);
    if let Some(k) = flags.reps.or(file.reps) {
        measure.repetitions = k;
    }
    let counter = match (flags.counter, &file.counter) {
        (Some(c), _) => c,
        (None, Some(s)) => s.parse()?,
        (None, None) => CounterBackend::Auto,
    };
    measure.backend = match (unit, counter) {
        (CostUnit::WallNs, CounterBackend::Auto) => CounterBackend::Wall,
        (_, c) => c,
    };
    measure.cpu_pin = file.cpu_pin;
    measure.count_kernel = file.count_kernel.unwrap_or(false);
    measure.validate().map_err(|e| e.to_string())?;

    let mut limits = Limits::default();
    if let Some(t) = flags.timeout.or(file.wall_timeout_s) {
        if !(t > 0.0) || !t.is_finite() {
            return Err(format!("timeout must be positive, got {t}"));
        }
        limits.wall_timeout = Duration::from_secs_f64(t);
    }
    if let Some(m) = file.memory_cap_bytes {
        limits.memory_cap = m;
    }
    if let Some(o) = file.output_cap_bytes {
        limits.output_cap = o;
    }
    limits.validate().map_err(|e| e.to_string())?;
    Ok(RunSetup {
        sandbox: Sandbox::new(runner),
        measure,
        limits,
        file,
    })
}

fn curation_config(setup: &RunSetup, generator_samples: Option<usize>) -> CurationConfig {
    let f = &setup.file;
    let mut c = CurationConfig {
        limits: setup.limits.clone(),
        measure: setup.measure.clone(),
        ..CurationConfig::default()
    };
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = f.$field.clone() { c.$field = v; } )* };
    }
    take!(t_thresh, cv_thresh, cluster_comparator, generator_temperature, scale_start,
          max_scale_rounds, stop_on_plateau, min_valid_solutions, concurrency);
    if let Some(v) = generator_samples.or(f.generator_samples) {
        c.generator_samples = v;
    }
    if let Some(v) = f.bias {
        c.cluster.bias = v;
    }
    if let Some(v) = f.w {
        c.cluster.w = v;
    }
    if let Some(v) = f.min_clusters {
        c.cluster.min_clusters = v;
    }
    c
}

/// Re-runs each ground truth on its own tests.
fn strict_check(sandbox: &Sandbox, tasks: &[Task], limits: &Limits) -> Result<(), String> {
    let failures: Vec<String> = tasks
        .par_iter()
        .filter(|t| !t.correctness_tests.is_empty())
        .filter_map(|t| {
            let r = sandbox.check_correct(&t.ground_truth_solution(), &t.entry_point, &t.correctness_tests, limits);
            r.failure().map(|f| {
                format!("task {}: test {} disagrees with the ground truth ({}: {})", t.task_id, f.index, f.status, f.detail)
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("\n"))
    }
}

pub fn cmd_curate(args: &CurateArgs) -> Result<u8, String> {
    let setup = run_setup(&args.run)?;
    let config = curation_config(&setup, args.generator_samples);
    config.validate().map_err(|e| e.to_string())?;
    config.measure.resolve().map_err(|e| e.to_string())?;
    let tasks = model::load_suite(&args.tasks).map_err(|e| e.to_string())?;
    let pools = model::load_solutions(&args.solutions).map_err(|e| e.to_string())?;
    if args.strict {
        strict_check(&setup.sandbox, &tasks, &setup.limits)?;
    }
    let template = match args.template.clone().or_else(|| setup.file.template.clone()) {
        Some(p) => Template::load(&p),
        None => Ok(Template::default_template()),
    }
    .map_err(|e| e.to_string())?;
    let model_name = args
        .model
        .clone()
        .or_else(|| setup.file.model.clone())
        .or_else(|| std::env::var(crate::llmgen::MODEL_ENV).ok())
        .unwrap_or_else(|| "default".into());
    let sampler = match &args.replay_transcript {
        Some(path) => GeneratorSampler::replay(path, &model_name),
        None => Endpoint::from_env().and_then(|mut ep| {
            ep.model = model_name.clone();
            GeneratorSampler::live(ep, args.record_transcript.as_deref())
        }),
    }
    .map_err(|e| e.to_string())?;

    let curator = Curator {
        sandbox: &setup.sandbox,
        sampler: &sampler,
        template: &template,
        config: &config,
    };
    let result = curator.curate_suite(&tasks, &pools).map_err(|e| e.to_string())?;
    model::save_suite(&result.curated, &args.out).map_err(|e| e.to_string())?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.join("curation_log.jsonl"));
    let mut log = fs::File::create(&log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    result.write_log(&mut log).map_err(|e| e.to_string())?;

    for (id, reasons) in &result.rejected {
        let text: Vec<String> = reasons.iter().map(ToString::to_string).collect();
        eprintln!("rejected {id}: {}", text.join("; "));
    }
    eprintln!(
        "curated {} of {} tasks into {}",
        result.curated.len(),
        tasks.len(),
        args.out.display()
    );
    Ok(if result.curated.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

/// Scores one task's candidates against its re-profiled references.
pub fn evaluate_task(
    sandbox: &Sandbox,
    task: &Task,
    candidates: &[Solution],
    cap: usize,
    measure_cfg: &MeasureConfig,
    limits: &Limits,
) -> Result<TaskEvaluation, String> {
    let refs = task
        .references
        .as_ref()
        .ok_or_else(|| format!("task {} has no references", task.task_id))?;
    let input = task.perf_input.as_ref().expect("validated: references imply perf_input");

    let checks: Vec<_> = candidates
        .par_iter()
        .map(|c| sandbox.check_correct(c, &task.entry_point, &task.correctness_tests, limits))
        .collect();

    let mut reference_costs = Vec::with_capacity(refs.len());
    for e in &refs.entries {
        let p = measure::profile(sandbox, &e.solution, &task.entry_point, input, limits, measure_cfg)
            .map_err(|err| format!("task {}: reference {}: {err}", task.task_id, e.solution.solution_id))?;
        reference_costs.push(p.mean);
    }
    let ladder = SessionLadder::from_references(refs, measure_cfg.unit, reference_costs.clone())
        .map_err(|e| e.to_string())?;

    let mut passing_seen = 0usize;
    let mut samples = Vec::with_capacity(candidates.len());
    for (cand, check) in candidates.iter().zip(&checks) {
        let mut s = SampleScore {
            solution_id: cand.solution_id.clone(),
            passed: check.passed,
            status: check.failure().map_or("ok".to_string(), |f| f.status.to_string()),
            failed_test: check.first_failure,
            cost: None,
            cv: None,
            dps: None,
            dps_norm: None,
        };
        if check.passed {
            passing_seen += 1;
            if passing_seen <= cap {
                match measure::profile(sandbox, cand, &task.entry_point, input, limits, measure_cfg) {
                    Ok(p) => {
                        s.cost = Some(p.mean);
                        s.cv = Some(p.cv);
                        s.dps = Some(score::dps(&ladder, p.mean, measure_cfg.unit).map_err(|e| e.to_string())?);
                        s.dps_norm =
                            Some(score::dps_norm(&ladder, p.mean, measure_cfg.unit).map_err(|e| e.to_string())?);
                    }
                    Err(measure::MeasureError::Run { status, detail }) => {
                        // Correct but unable to finish the performance input:
                        // slower than every reference.
                        log::warn!("task {}: sample {} failed on the perf input: {detail}", task.task_id, cand.solution_id);
                        s.status = format!("perf_{status}");
                        s.dps = Some(0.0);
                        s.dps_norm = Some(0.0);
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
        samples.push(s);
    }
    Ok(TaskEvaluation {
        task_id: task.task_id.clone(),
        split: task.split(),
        reference_costs,
        reference_ratios: refs.ratios(),
        samples,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<u8, String> {
    let setup = run_setup(&args.run)?;
    let backend = setup.measure.resolve().map_err(|e| e.to_string())?;
    let tasks = model::load_suite(&args.suite).map_err(|e| format!("suite: {e}"))?;
    let hash = model::suite_hash(&tasks).map_err(|e| e.to_string())?;
    let pools = model::load_solutions(&args.candidates).map_err(|e| e.to_string())?;
    let cap = args.samples.or(setup.file.samples).unwrap_or(10);
    if cap == 0 {
        return Err("--samples must be at least 1".into());
    }
    if args.strict {
        strict_check(&setup.sandbox, &tasks, &setup.limits)?;
    }
    for id in pools.keys() {
        if !tasks.iter().any(|t| &t.task_id == id) {
            log::warn!("candidates for unknown task {id} ignored");
        }
    }
    let empty = Vec::new();
    let mut evals = Vec::new();
    for task in &tasks {
        if task.references.is_none() {
            log::warn!("task {} is not curated; skipped", task.task_id);
            continue;
        }
        let cands = pools.get(&task.task_id).unwrap_or(&empty);
        evals.push(evaluate_task(&setup.sandbox, task, cands, cap, &setup.measure, &setup.limits)?);
    }
    let provenance = Provenance {
        suite_hash: hash,
        machine: MachineFingerprint::detect(),
        unit: setup.measure.unit,
        backend: backend.to_string(),
        repetitions: setup.measure.repetitions,
        sample_cap: cap,
        label: args
            .label
            .clone()
            .or_else(|| setup.file.label.clone())
            .unwrap_or_else(|| args.candidates.file_stem().map_or("candidates".into(), |s| s.to_string_lossy().into_owned())),
    };
    let report = ScoreReport::new(provenance, evals);
    report.save(&args.out).map_err(|e| e.to_string())?;
    print!("{}", render_summary(&report));
    if report.aggregates.dps.is_none() {
        eprintln!("warning: {}", score::ScoreError::EmptyAggregate);
        return Ok(EXIT_EMPTY);
    }
    Ok(EXIT_OK)
}

pub fn render_summary(report: &ScoreReport) -> String {
    let a = &report.aggregates;
    let p = &report.provenance;
    let mut out = String::new();
    let fmt_opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
    out.push_str(&format!(
        "{} ({} tasks, unit {}, {} reps, suite {})\n",
        p.label,
        report.tasks.len(),
        p.unit,
        p.repetitions,
        &p.suite_hash[..p.suite_hash.len().min(12)]
    ));
    out.push_str(&format!("  pass@1      {}\n", fmt_opt(a.pass_at_1.map(|v| 100.0 * v))));
    for (split, v) in &a.pass_at_1_by_split {
        out.push_str(&format!("    {split:<10}{:.1}\n", 100.0 * v));
    }
    for (name, s) in [("DPS", &a.dps), ("DPS_norm", &a.dps_norm)] {
        out.push_str(&format!(
            "  {name:<10}  avg {} max {} min {}\n",
            fmt_opt(s.as_ref().map(|s| s.avg)),
            fmt_opt(s.as_ref().map(|s| s.max)),
            fmt_opt(s.as_ref().map(|s| s.min)),
        ));
    }
    out.push_str(&format!("  scored tasks {}\n", a.scored_tasks));
    out
}

fn mean_scored_cost(t: &TaskEvaluation, cap: usize) -> Option<f64> {
    let costs: Vec<f64> = t
        .samples
        .iter()
        .filter(|s| s.passed)
        .take(cap)
        .filter_map(|s| s.cost)
        .collect();
    (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64)
}

pub fn cmd_report(args: &ReportArgs) -> Result<u8, String> {
    let reports: Vec<ScoreReport> = args
        .reports
        .iter()
        .map(|p| ScoreReport::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<_, _>>()?;
    if !args.pairwise {
        for r in &reports {
            print!("{}", render_summary(r));
        }
        return Ok(if reports.iter().any(|r| r.aggregates.dps.is_some()) {
            EXIT_OK
        } else {
            EXIT_EMPTY
        });
    }
    let [a, b] = reports.as_slice() else {
        return Err("--pairwise needs exactly two reports".into());
    };
    let cmp = match score::pairwise_compare(a, b) {
        Ok(c) => c,
        Err(score::ScoreError::EmptyCommonSet) => {
            eprintln!("{}", score::ScoreError::EmptyCommonSet);
            return Ok(EXIT_EMPTY);
        }
        Err(e) => return Err(e.to_string()),
    };
    print!("{cmp}");
    // Average speedup of B over A on the common tasks, as a diagnostic.
    let pairs: Vec<(f64, f64)> = cmp
        .common_tasks
        .iter()
        .filter_map(|id| {
            let ta = a.tasks.iter().find(|t| &t.task_id == id)?;
            let tb = b.tasks.iter().find(|t| &t.task_id == id)?;
            Some((
                mean_scored_cost(ta, a.provenance.sample_cap)?,
                mean_scored_cost(tb, b.provenance.sample_cap)?,
            ))
        })
        .collect();
    if let Ok(s) = score::avg_speedup(&pairs) {
        println!("avg speedup of {} over {} (diagnostic): {s:.3}x", cmp.label_b, cmp.label_a);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationRow {
    pub solution_id: String,
    pub mean_wall_ns: f64,
    pub cv: f64,
}

/// Mean CV per decade of mean wall time: `(floor(log10(mean)), count, mean_cv)`.
pub fn decade_buckets(rows: &[VariationRow]) -> Vec<(i32, usize, f64)> {
    let mut buckets: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for r in rows {
        buckets
            .entry(r.mean_wall_ns.log10().floor() as i32)
            .or_default()
            .push(r.cv);
    }
    buckets
        .into_iter()
        .map(|(d, cvs)| (d, cvs.len(), cvs.iter().sum::<f64>() / cvs.len() as f64))
        .collect()
}

fn buckets_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or("variation".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.buckets.csv"))
}

pub fn cmd_variation_study(args: &VariationArgs) -> Result<u8, String> {
    let mut flags = args.run.clone();
    flags.unit = Some(UnitFlag::Wall);
    let mut setup = run_setup(&flags)?;
    if flags.reps.is_none() && setup.file.reps.is_none() {
        setup.measure.repetitions = 5;
    }
    let tasks = model::load_suite(&args.suite).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for task in &tasks {
        let (Some(input), Some(refs)) = (&task.perf_input, &task.references) else {
            continue;
        };
        for e in &refs.entries {
            match measure::profile(&setup.sandbox, &e.solution, &task.entry_point, input, &setup.limits, &setup.measure) {
                Ok(p) => rows.push(VariationRow {
                    solution_id: format!("{}::{}", task.task_id, e.solution.solution_id),
                    mean_wall_ns: p.mean,
                    cv: p.cv,
                }),
                Err(err) => log::warn!("{}::{}: {err}", task.task_id, e.solution.solution_id),
            }
        }
    }
    let mut csv = String::from("solution_id,mean_wall_ns,cv\n");
    for r in &rows {
        csv.push_str(&format!("{},{:.1},{:.6}\n", csv_field(&r.solution_id), r.mean_wall_ns, r.cv));
    }
    fs::write(&args.out, csv).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let buckets = decade_buckets(&rows);
    let mut bcsv = String::from("decade_lo_ns,decade_hi_ns,count,mean_cv\n");
    for (d, n, cv) in &buckets {
        bcsv.push_str(&format!("1e{d},1e{},{n},{cv:.6}\n", d + 1));
        println!("[1e{d}, 1e{}) ns: {n} solutions, mean CV {cv:.4}", d + 1);
    }
    let bpath = buckets_path(&args.out);
    fs::write(&bpath, bcsv).map_err(|e| format!("{}: {e}", bpath.display()))?;
    Ok(if rows.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cmd_profile(args: &ProfileArgs) -> Result<u8, String> {
    let setup = run_setup(&args.run)?;
    let backend = setup.measure.resolve().map_err(|e| e.to_string())?;
    let source = fs::read_to_string(&args.solution).map_err(|e| format!("{}: {e}", args.solution.display()))?;
    let input_text = fs::read_to_string(&args.input).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let input = Args::decode(input_text.trim()).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let solution = Solution::new("profiled", source, "cli");
    let profile = measure::profile(&setup.sandbox, &solution, &args.entry_point, &input, &setup.limits, &setup.measure)
        .map_err(|e| e.to_string())?;
    let out = serde_json::json!({"backend": backend.to_string(), "profile": profile});
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(&out).expect("serializes")).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

/// Runs a parsed command line and maps errors to exit status 1.
pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Curate(a) => cmd_curate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
        Command::VariationStudy(a) => cmd_variation_study(a),
        Command::Profile(a) => cmd_profile(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
