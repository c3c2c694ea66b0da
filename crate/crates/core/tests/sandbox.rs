mod common;

use std::time::{Duration, Instant};

use common::{sandbox, sol, zombie_children};
use dpe_core::measure::MeasureConfig;
use dpe_core::model::TestCase;
use dpe_core::sandbox::{Limits, RunStatus};
use dpe_core::value::{Args, Value};

fn one(v: Value) -> Args {
    Args(vec![v])
}

#[test]
fn identity_returns_its_argument() {
    let out = sandbox().run_guest(
        &sol("id", "def f\n return arg 0\n"),
        "f",
        &one(Value::int(42)),
        &Limits::default(),
    );
    assert_eq!(out.status, RunStatus::Ok, "{}", out.describe());
    assert_eq!(out.value, Some(Value::int(42)));
}

#[test]
fn infinite_loop_times_out_within_grace() {
    let limits = Limits::default().with_timeout(Duration::from_secs(1));
    let t0 = Instant::now();
    let out = sandbox().run_guest(&sol("spin", "def f\n spin\n"), "f", &Args::default(), &limits);
    let took = t0.elapsed();
    assert_eq!(out.status, RunStatus::Timeout, "{}", out.describe());
    assert!(out.value.is_none());
    assert!(took < Duration::from_millis(1500) + Duration::from_millis(300), "{took:?}");
}

#[test]
fn allocator_loop_hits_the_memory_cap() {
    let limits = Limits::default().with_memory_cap(256 << 20);
    let out = sandbox().run_guest(&sol("hog", "def f\n alloc_forever\n"), "f", &Args::default(), &limits);
    assert_eq!(out.status, RunStatus::Oom, "{}", out.describe());
}

#[test]
fn load_failures_and_exceptions_are_crashes() {
    let sb = sandbox();
    let broken = sb.run_guest(&sol("b", "def f\n frobnicate\n"), "f", &Args::default(), &Limits::default());
    assert_eq!(broken.status, RunStatus::Crash);
    assert!(broken.detail.contains("load"), "{}", broken.describe());
    let raising = sb.run_guest(&sol("r", "def f\n fail nope\n"), "f", &Args::default(), &Limits::default());
    assert_eq!(raising.status, RunStatus::Crash);
    assert!(raising.stderr_tail.contains("nope"));
}

#[test]
fn oversized_output_is_a_protocol_error() {
    let limits = Limits {
        output_cap: 100,
        ..Limits::default()
    };
    let out = sandbox().run_guest(
        &sol("big", "def f\n return scaled_list\n"),
        "f",
        &one(Value::int(1000)),
        &limits,
    );
    assert_eq!(out.status, RunStatus::ProtocolError, "{}", out.describe());
}

#[test]
fn check_correct_reports_the_failing_test() {
    let tests: Vec<TestCase> = (0..3)
        .map(|i| TestCase {
            args: one(Value::List(vec![Value::int(i), Value::int(10)])),
            expected: Value::int(i + 10),
        })
        .collect();
    let sb = sandbox();
    let good = sb.check_correct(&sol("gt", "def f\n return sum\n"), "f", &tests, &Limits::default());
    assert!(good.passed);
    let mut off = tests.clone();
    off[1].expected = Value::int(999);
    let bad = sb.check_correct(&sol("gt", "def f\n return sum\n"), "f", &off, &Limits::default());
    assert!(!bad.passed);
    assert_eq!(bad.first_failure, Some(1));
    assert_eq!(bad.failure().unwrap().status, RunStatus::WrongOutput);
}

#[test]
fn float_within_tolerance_passes() {
    let tests = vec![TestCase {
        args: one(Value::List(vec![Value::Float(1.5)])),
        expected: Value::Float(1.5),
    }];
    let near = sandbox().check_correct(
        &sol("near", "def f\n return float_sum_plus 1e-9\n"),
        "f",
        &tests,
        &Limits::default(),
    );
    assert!(near.passed);
    let far = sandbox().check_correct(
        &sol("far", "def f\n return float_sum_plus 1e-3\n"),
        "f",
        &tests,
        &Limits::default(),
    );
    assert!(!far.passed);
}

#[test]
fn measured_and_unmeasured_runs_agree() {
    let sb = sandbox();
    let s = sol("w", "def f\n work 100 1\n return sum_plus 1\n");
    let input = one(Value::List((0..50).map(Value::int).collect()));
    let plain = sb.run_guest(&s, "f", &input, &Limits::default());
    let measured = sb
        .run_measured(&s, "f", &input, &Limits::default(), &MeasureConfig::wall())
        .unwrap();
    assert_eq!(plain.status, measured.status);
    assert_eq!(plain.value, measured.value);
    assert!(measured.cost.unwrap() > 0);
}

#[test]
fn generators_produce_arguments() {
    let args = sandbox()
        .generate("def perf_input_gen(scale):\n return scaled_list\n", 4, &Limits::default())
        .unwrap();
    assert_eq!(args.0.len(), 1);
    assert_eq!(args.0[0].as_list().unwrap().len(), 4);
    assert!(sandbox().generate("def perf_input_gen\n fail x\n", 4, &Limits::default()).is_err());
    assert!(sandbox().generate("def perf_input_gen\n return json 5\n", 4, &Limits::default()).is_err());
}

#[test]
fn no_zombies_after_many_runs() {
    let sb = sandbox();
    let quick = Limits::default().with_timeout(Duration::from_millis(300));
    for src in ["def f\n return arg 0\n", "def f\n spin\n", "def f\n fail x\n", "garbage"] {
        let _ = sb.run_guest(&sol("z", src), "f", &one(Value::int(1)), &quick);
    }
    assert!(zombie_children().is_empty(), "{:?}", zombie_children());
}
