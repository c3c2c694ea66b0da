//! The checked-in seed fixture must match its generator, and curating it
//! must reproduce the checked-in suite. Run with `DPE_BLESS=1` to rewrite
//! the fixture after changing the generator.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dpe_core::curate::Curator;
use dpe_core::llmgen::{GeneratorSampler, Template};
use dpe_core::model::{self, render_suite, save_solutions, Task};

use common::seed::*;

fn blessing() -> bool {
    std::env::var_os("DPE_BLESS").is_some_and(|v| v == "1")
}

fn solutions_bytes(pools: &BTreeMap<String, Vec<model::Solution>>) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.jsonl");
    save_solutions(pools, &p).unwrap();
    fs::read(p).unwrap()
}

/// Every fixture input file, rendered from the generator.
fn expected_inputs() -> BTreeMap<PathBuf, Vec<u8>> {
    let tasks = seed_tasks();
    let template = Template::default_template();
    let mut files = BTreeMap::new();
    for (p, bytes) in render_suite(&tasks).unwrap() {
        files.insert(Path::new("tasks").join(p), bytes);
    }
    files.insert("solutions.jsonl".into(), solutions_bytes(&seed_solutions()));
    let mut transcript = Vec::new();
    for e in seed_transcript(&tasks, &template, seed_config().generator_temperature) {
        transcript.extend(serde_json::to_vec(&e).unwrap());
        transcript.push(b'\n');
    }
    files.insert("transcript.jsonl".into(), transcript);
    files.insert("curate.toml".into(), SEED_CONFIG_TOML.as_bytes().to_vec());
    let (fast, slow) = seed_candidates();
    files.insert("candidates_fast.jsonl".into(), solutions_bytes(&fast));
    files.insert("candidates_slow.jsonl".into(), solutions_bytes(&slow));
    files
}

fn curate_seed() -> (Vec<Task>, Vec<u8>) {
    let dir = fixture_dir();
    let tasks = model::load_suite(&dir.join("tasks")).unwrap();
    let pools = model::load_solutions(&dir.join("solutions.jsonl")).unwrap();
    let sampler = GeneratorSampler::replay(&dir.join("transcript.jsonl"), SEED_MODEL).unwrap();
    let sandbox = common::sandbox();
    let template = Template::default_template();
    let config = seed_config();
    let curator = Curator {
        sandbox: &sandbox,
        sampler: &sampler,
        template: &template,
        config: &config,
    };
    let result = curator.curate_suite(&tasks, &pools).unwrap();
    let mut log = Vec::new();
    result.write_log(&mut log).unwrap();
    assert!(result.rejected.is_empty(), "{:?}", result.rejected);
    (result.curated, log)
}

#[test]
fn fixture_inputs_match_generator() {
    let dir = fixture_dir();
    let expected = expected_inputs();
    if blessing() {
        let _ = fs::remove_dir_all(dir.join("tasks"));
        for (p, bytes) in &expected {
            let full = dir.join(p);
            fs::create_dir_all(full.parent().unwrap()).unwrap();
            fs::write(full, bytes).unwrap();
        }
        let (curated, log) = curate_seed();
        model::save_suite(&curated, &dir.join("suite")).unwrap();
        fs::write(dir.join("curation_log.jsonl"), log).unwrap();
        return;
    }
    for (p, bytes) in &expected {
        let on_disk = fs::read(dir.join(p)).unwrap_or_default();
        assert!(on_disk == *bytes, "{} is stale; rerun with DPE_BLESS=1", p.display());
    }
}

/// Only the measured costs may differ between toolchains.
fn ladder_shape(tasks: &[Task]) -> Vec<(String, String, Vec<(String, f64)>)> {
    tasks
        .iter()
        .map(|t| {
            let refs = t.references.as_ref().unwrap();
            (
                t.task_id.clone(),
                t.perf_input.as_ref().unwrap().encode(),
                refs.entries
                    .iter()
                    .map(|e| (e.solution.solution_id.clone(), e.cumulative_ratio))
                    .collect(),
            )
        })
        .collect()
}

#[test]
fn curating_the_seed_reproduces_the_checked_in_suite() {
    if blessing() {
        return;
    }
    let checked_in = model::load_suite(&fixture_dir().join("suite")).unwrap();
    let (curated, _) = curate_seed();
    assert_eq!(ladder_shape(&curated), ladder_shape(&checked_in));
    assert_eq!(curated.len(), 6);
    for t in &curated {
        assert!(t.references.as_ref().unwrap().len() >= 4, "{}", t.task_id);
    }
}
