mod common;

use common::{sandbox, sol};
use dpe_core::measure::{self, CounterBackend, MeasureConfig, MeasureError};
use dpe_core::model::CostUnit;
use dpe_core::sandbox::Limits;
use dpe_core::value::{Args, Value};

fn instructions() -> MeasureConfig {
    MeasureConfig::instructions()
}

fn n(k: i64) -> Args {
    Args(vec![Value::int(k)])
}

#[test]
fn deterministic_guest_has_negligible_cv() {
    let p = measure::profile(
        &sandbox(),
        &sol("w", "def f\n work 1000 1\n return arg 0\n"),
        "f",
        &n(200),
        &Limits::default(),
        &instructions(),
    )
    .unwrap();
    assert_eq!(p.runs.len(), 3);
    assert_eq!(p.unit, CostUnit::Instructions);
    assert!(p.cv <= 0.001, "cv {}", p.cv);
    assert!(p.mean >= 200_000.0, "{p:?}");
}

#[test]
fn single_repetition_has_zero_cv() {
    let p = measure::profile(
        &sandbox(),
        &sol("w", "def f\n work 10 1\n return arg 0\n"),
        "f",
        &n(5),
        &Limits::default(),
        &instructions().with_repetitions(1),
    )
    .unwrap();
    assert_eq!(p.runs.len(), 1);
    assert_eq!(p.cv, 0.0);
}

#[test]
fn sessions_on_the_same_work_agree() {
    let s = sol("w", "def f\n work_const 300000\n return arg 0\n");
    let a = sandbox()
        .run_measured(&s, "f", &n(1), &Limits::default(), &instructions())
        .unwrap();
    let b = sandbox()
        .run_measured(&s, "f", &n(1), &Limits::default(), &instructions())
        .unwrap();
    let (a, b) = (a.cost.unwrap() as f64, b.cost.unwrap() as f64);
    assert!((a - b).abs() / a <= 0.01, "{a} vs {b}");
}

#[test]
fn empty_region_is_small_and_loop_costs_scale() {
    let sb = sandbox();
    let lim = Limits::default();
    let cfg = instructions().with_repetitions(1);
    let empty = measure::profile(&sb, &sol("e", "def f\n return arg 0\n"), "f", &n(1), &lim, &cfg).unwrap();
    let loop_ = measure::profile(&sb, &sol("l", "def f\n work_const 1000000\n return arg 0\n"), "f", &n(1), &lim, &cfg).unwrap();
    assert!(empty.mean < 10_000.0, "empty region {}", empty.mean);
    assert!(loop_.mean >= 1_000_000.0, "loop {}", loop_.mean);
}

#[test]
fn sleep_costs_time_not_instructions() {
    let sb = sandbox();
    let s = sol("sleep", "def f\n sleep_ms 50\n return arg 0\n");
    let cfg_i = instructions().with_repetitions(1);
    let cfg_w = MeasureConfig::wall().with_repetitions(1);
    let i = measure::profile(&sb, &s, "f", &n(1), &Limits::default(), &cfg_i).unwrap();
    let w = measure::profile(&sb, &s, "f", &n(1), &Limits::default(), &cfg_w).unwrap();
    assert!(w.mean >= 50e6, "wall {}", w.mean);
    assert!(i.mean < 0.01 * w.mean, "instructions {} vs wall {}", i.mean, w.mean);
}

#[test]
fn failing_guest_propagates_the_run_status() {
    let err = measure::profile(
        &sandbox(),
        &sol("x", "def f\n fail boom\n"),
        "f",
        &n(1),
        &Limits::default(),
        &instructions(),
    )
    .unwrap_err();
    assert!(matches!(err, MeasureError::Run { .. }), "{err}");
}

#[test]
fn explicit_perf_backend_without_pmu_is_unavailable() {
    if measure::perf_available() {
        return;
    }
    let cfg = instructions().with_backend(CounterBackend::Perf);
    let err = sandbox()
        .run_measured(&sol("e", "def f\n return arg 0\n"), "f", &n(1), &Limits::default(), &cfg)
        .unwrap_err();
    assert!(matches!(err, MeasureError::CounterUnavailable(_)), "{err}");
}

/// Quiet-machine tier: `cargo test -- --ignored`.
#[test]
#[ignore]
fn hundred_million_iteration_loop() {
    let p = measure::profile(
        &sandbox(),
        &sol("big", "def f\n work_const 100000000\n return arg 0\n"),
        "f",
        &n(1),
        &Limits::default().with_timeout(std::time::Duration::from_secs(600)),
        &instructions(),
    )
    .unwrap();
    let max = *p.runs.iter().max().unwrap() as f64;
    let min = *p.runs.iter().min().unwrap() as f64;
    assert!(min >= 1e8, "{p:?}");
    assert!((max - min) / min <= 0.001, "{p:?}");
    assert!(max - min <= 1e5, "{p:?}");
}
