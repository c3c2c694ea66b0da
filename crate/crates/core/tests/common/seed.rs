//! The synthetic seed suite: six stub-language tasks, each with a pool of
//! solutions in four well-separated cost tiers and a recorded transcript of
//! generator completions.
//!
//! Every task takes one argument `n` and returns `n + offset`. Generators
//! return a capped scale, so scale search plateaus quickly and the curated
//! input is the same on every machine.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dpe_core::curate::CurationConfig;
use dpe_core::llmgen::{build_prompt, chat_request, request_key, Template, TranscriptEntry};
use dpe_core::measure::MeasureConfig;
use dpe_core::model::{Solution, Task, TestCase};
use dpe_core::value::{Args, Value};

pub const SEED_MODEL: &str = "seed-model";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/seed")
}

struct SeedTask {
    id: &'static str,
    offset: i64,
    /// Busy-work units per unit of `n`, slowest tier first.
    tiers: [u64; 4],
    /// Extra sleep in the slowest tier (milliseconds).
    slow_sleep_ms: u64,
    /// Cap the generators put on the scale.
    cap: u64,
    /// Shape of the second completion.
    second: Second,
}

#[derive(Clone, Copy)]
enum Second {
    /// Prose without a code fence.
    Unparsable,
    /// A generator that raises.
    Raises,
    /// A valid generator with a smaller cap (loses probe selection).
    SmallerCap(u64),
}

const SEED_TASKS: [SeedTask; 6] = [
    SeedTask { id: "arith/offset_three", offset: 3, tiers: [1600, 450, 130, 40], slow_sleep_ms: 0, cap: 64, second: Second::Unparsable },
    SeedTask { id: "arith/offset_seven", offset: 7, tiers: [2000, 600, 150, 45], slow_sleep_ms: 0, cap: 64, second: Second::Raises },
    SeedTask { id: "arith/negate_gap", offset: -5, tiers: [1200, 380, 110, 35], slow_sleep_ms: 0, cap: 64, second: Second::SmallerCap(16) },
    SeedTask { id: "lists/window_sum", offset: 11, tiers: [2400, 700, 200, 60], slow_sleep_ms: 0, cap: 48, second: Second::Unparsable },
    SeedTask { id: "lists/pair_count", offset: 0, tiers: [1800, 520, 150, 44], slow_sleep_ms: 0, cap: 56, second: Second::Raises },
    SeedTask { id: "io/slow_reader", offset: 1, tiers: [1600, 450, 130, 40], slow_sleep_ms: 100, cap: 64, second: Second::Unparsable },
];

fn body(work: u64, sleep_ms: u64, offset: i64) -> String {
    let mut s = String::new();
    if sleep_ms > 0 {
        s.push_str(&format!("    sleep_ms {sleep_ms}\n"));
    }
    s.push_str(&format!("    work {work}\n    return sum_plus {offset}\n"));
    s
}

fn source(entry: &str, work: u64, sleep_ms: u64, offset: i64) -> String {
    format!("def {entry}(n):\n{}", body(work, sleep_ms, offset))
}

fn entry_of(seed: &SeedTask) -> String {
    seed.id.rsplit('/').next().unwrap().to_string()
}

pub fn seed_tasks() -> Vec<Task> {
    SEED_TASKS
        .iter()
        .map(|s| {
            let entry = entry_of(s);
            let tests = [0i64, 3, 10, 1000]
                .iter()
                .map(|&n| TestCase {
                    args: Args(vec![Value::int(n)]),
                    expected: Value::int(n + s.offset),
                })
                .collect();
            Task {
                task_id: s.id.to_string(),
                instruction: format!("Return n + {} for a non-negative integer n.", s.offset),
                entry_point: entry.clone(),
                ground_truth: source(&entry, s.tiers[1], 0, s.offset),
                correctness_tests: tests,
                perf_input: None,
                references: None,
            }
        })
        .collect()
}

/// Ten correct solutions per task (3/3/2/2 across the tiers, each slightly
/// perturbed) plus one wrong one.
pub fn seed_solutions() -> BTreeMap<String, Vec<Solution>> {
    let mut out = BTreeMap::new();
    for s in &SEED_TASKS {
        let entry = entry_of(s);
        let mut pool = Vec::new();
        let layout = [(0usize, 3u64), (1, 3), (2, 2), (3, 2)];
        for (tier, count) in layout {
            for k in 0..count {
                let work = s.tiers[tier] + k * s.tiers[tier] / 200;
                let sleep = if tier == 0 { s.slow_sleep_ms } else { 0 };
                pool.push(Solution::new(
                    format!("t{tier}_{k}"),
                    source(&entry, work, sleep, s.offset),
                    "seed",
                ));
            }
        }
        pool.push(Solution::new("wrong", source(&entry, s.tiers[3], 0, s.offset + 1), "seed"));
        out.insert(s.id.to_string(), pool);
    }
    out
}

fn fenced(code: &str) -> String {
    format!("```python\n{code}```\n")
}

fn generator(cap: u64) -> String {
    format!("def perf_input_gen(scale):\n    return scaled_int {cap}\n")
}

fn completions(seed: &SeedTask) -> [String; 2] {
    let first = format!(
        "The cost grows linearly with n, so the input is n itself.\n\n{}",
        fenced(&generator(seed.cap))
    );
    let second = match seed.second {
        Second::Unparsable => "I would call the function with a large n.".to_string(),
        Second::Raises => fenced("def perf_input_gen(scale):\n    fail not implemented\n"),
        Second::SmallerCap(c) => format!("A moderate n keeps it quick.\n\n{}", fenced(&generator(c))),
    };
    [first, second]
}

pub fn seed_transcript(tasks: &[Task], template: &Template, temperature: f64) -> Vec<TranscriptEntry> {
    let mut out = Vec::new();
    for (task, seed) in tasks.iter().zip(&SEED_TASKS) {
        let prompt = build_prompt(task, template).unwrap();
        let request = chat_request(&prompt, SEED_MODEL, temperature);
        let key = request_key(&request);
        for (i, text) in completions(seed).into_iter().enumerate() {
            out.push(TranscriptEntry {
                key: key.clone(),
                sample_index: i,
                request: request.clone(),
                response: text,
            });
        }
    }
    out
}

/// Curation settings the seed suite is built with (also in `curate.toml`).
pub fn seed_config() -> CurationConfig {
    CurationConfig {
        generator_samples: 2,
        measure: MeasureConfig::instructions().with_repetitions(1),
        ..CurationConfig::default()
    }
}

pub const SEED_CONFIG_TOML: &str = "\
# Settings the bundled seed suite was curated with.
unit = \"instructions\"
counter = \"auto\"
reps = 1
generator_samples = 2
";

/// Candidate samples from two imaginary models, for evaluate/report demos.
/// `fast` runs just under each task's second-fastest tier and `slow` at twice
/// its slowest; both submit one wrong answer first.
pub fn seed_candidates() -> (BTreeMap<String, Vec<Solution>>, BTreeMap<String, Vec<Solution>>) {
    let mut fast = BTreeMap::new();
    let mut slow = BTreeMap::new();
    for s in &SEED_TASKS {
        let entry = entry_of(s);
        let wrong = Solution::new("s0", source(&entry, 10, 0, s.offset - 1), "model");
        fast.insert(
            s.id.to_string(),
            vec![wrong.clone(), Solution::new("s1", source(&entry, s.tiers[2] - 10, 0, s.offset), "model")],
        );
        slow.insert(
            s.id.to_string(),
            vec![wrong, Solution::new("s1", source(&entry, s.tiers[0] * 2, 0, s.offset), "model")],
        );
    }
    (fast, slow)
}
