mod common;

use std::fs;

use dpe_core::cluster::{build_reference_set, cluster_costs, ClusterConfig};
use dpe_core::model::{self, CostUnit, Solution};
use dpe_core::value::{Args, Value};

use common::{offset_source, offset_task};

fn big_task() -> model::Task {
    let mut task = offset_task("big/input", 0, &offset_source("work 1", 0));
    let items: Vec<Value> = (0..1_000_000i64).map(|i| Value::int(i * 7919 - 3)).collect();
    task.perf_input = Some(Args(vec![Value::List(items), Value::Str("tail".into())]));
    let sols: Vec<Solution> = [("s0", 4e6), ("s1", 1e6)]
        .iter()
        .map(|(id, _)| Solution::new(*id, offset_source("work 1", 0), "pool"))
        .collect();
    let costs: Vec<(String, f64)> = vec![("s0".into(), 4e6), ("s1".into(), 1e6)];
    let clusters = cluster_costs(&costs, &ClusterConfig::default()).unwrap();
    task.references = Some(build_reference_set(&clusters, &sols, CostUnit::Instructions).unwrap());
    task
}

#[test]
fn million_element_input_round_trips_through_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = vec![big_task()];
    model::save_suite(&tasks, dir.path()).unwrap();

    let sidecar = dir.path().join("inputs/big%2Finput.bin.zst");
    assert!(sidecar.is_file());
    let line = fs::read_to_string(dir.path().join("suite.jsonl")).unwrap();
    assert!(line.len() < 10_000, "input was inlined");

    let loaded = model::load_suite(dir.path()).unwrap();
    assert_eq!(loaded, tasks);
    assert_eq!(model::suite_hash(&loaded).unwrap(), model::suite_hash(&tasks).unwrap());

    // Saving again is byte-identical.
    let again = tempfile::tempdir().unwrap();
    model::save_suite(&loaded, again.path()).unwrap();
    assert_eq!(fs::read(&sidecar).unwrap(), fs::read(again.path().join("inputs/big%2Finput.bin.zst")).unwrap());
}

#[test]
fn suite_hash_tracks_content() {
    let mut tasks = vec![big_task()];
    let h = model::suite_hash(&tasks).unwrap();
    tasks[0].instruction.push('!');
    assert_ne!(model::suite_hash(&tasks).unwrap(), h);
}
