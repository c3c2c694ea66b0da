#![allow(dead_code)]

pub mod seed;

use dpe_core::model::Solution;
use dpe_core::sandbox::{GuestRunner, Sandbox};

pub const STUB: &str = env!("CARGO_BIN_EXE_dpe-stub-guest");

pub fn sandbox() -> Sandbox {
    Sandbox::new(GuestRunner::new(STUB))
}

pub fn sol(id: &str, source: &str) -> Solution {
    Solution::new(id, source, "test")
}

/// Children of this process that are zombies right now.
pub fn zombie_children() -> Vec<i32> {
    let me = std::process::id() as i32;
    let mut out = Vec::new();
    for entry in std::fs::read_dir("/proc").unwrap().flatten() {
        let Ok(pid) = entry.file_name().to_string_lossy().parse::<i32>() else {
            continue;
        };
        let Ok(stat) = std::fs::read_to_string(format!("/proc/{pid}/stat")) else {
            continue;
        };
        // Fields after the parenthesized command name: state, ppid, ...
        let Some(rest) = stat.rsplit_once(')').map(|(_, r)| r) else {
            continue;
        };
        let mut fields = rest.split_whitespace();
        let state = fields.next().unwrap_or("");
        let ppid: i32 = fields.next().and_then(|p| p.parse().ok()).unwrap_or(0);
        if ppid == me && state == "Z" {
            out.push(pid);
        }
    }
    out
}

/// A stub task returning `n + offset`, with four small correctness tests.
pub fn offset_task(id: &str, offset: i64, ground_truth: &str) -> dpe_core::model::Task {
    use dpe_core::model::{Task, TestCase};
    use dpe_core::value::{Args, Value};
    Task {
        task_id: id.to_string(),
        instruction: format!("Return n + {offset}."),
        entry_point: "solve".into(),
        ground_truth: ground_truth.to_string(),
        correctness_tests: [0i64, 3, 10, 1000]
            .iter()
            .map(|&n| TestCase {
                args: Args(vec![Value::int(n)]),
                expected: Value::int(n + offset),
            })
            .collect(),
        perf_input: None,
        references: None,
    }
}

/// Source of a `solve` doing `ops` then returning `n + offset`.
pub fn offset_source(ops: &str, offset: i64) -> String {
    format!("def solve(n):\n    {ops}\n    return sum_plus {offset}\n")
}

/// Fenced generator completion returning `scaled_int <cap>`.
pub fn capped_generator(cap: u64) -> String {
    format!("Use a large n.\n\n```python\ndef perf_input_gen(scale):\n    return scaled_int {cap}\n```\n")
}

/// Writes a replay transcript holding `completions[i]` for `tasks[i]`.
pub fn write_transcript(
    path: &std::path::Path,
    tasks: &[dpe_core::model::Task],
    completions: &[Vec<String>],
    model: &str,
    temperature: f64,
) {
    use dpe_core::llmgen::{build_prompt, chat_request, request_key, Template, TranscriptEntry};
    let template = Template::default_template();
    let mut out = String::new();
    for (task, texts) in tasks.iter().zip(completions) {
        let request = chat_request(&build_prompt(task, &template).unwrap(), model, temperature);
        let key = request_key(&request);
        for (i, text) in texts.iter().enumerate() {
            let e = TranscriptEntry {
                key: key.clone(),
                sample_index: i,
                request: request.clone(),
                response: text.clone(),
            };
            out.push_str(&serde_json::to_string(&e).unwrap());
            out.push('\n');
        }
    }
    std::fs::write(path, out).unwrap();
}
