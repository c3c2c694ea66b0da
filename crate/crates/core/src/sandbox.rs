//! Spawning and confining guest processes, the READY/GO/DONE marker
//! protocol, and correctness testing.
//!
//! Each run gets a fresh process in its own process group with an
//! address-space limit. A watchdog thread sends `SIGTERM` to the group at
//! the wall timeout and `SIGKILL` 500 ms later. The child is always reaped
//! before `run_guest` returns.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{
    self, measure_region, open_counter, LaunchPlan, MeasureConfig, MeasureError, RegionMarkers,
    ResolvedBackend,
};
use crate::model::{Solution, TestCase};
use crate::value::{Args, Value};

/// Extra time between `SIGTERM` and `SIGKILL`.
pub const KILL_GRACE: Duration = Duration::from_millis(500);
const STDERR_TAIL_BYTES: usize = 8 * 1024;
const MARKER_LINE_CAP: u64 = 64;
const OOM_MARKERS: &[&str] = &[
    "memory allocation of",
    "MemoryError",
    "out of memory",
    "Cannot allocate memory",
];

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid limits: {0}")]
    Limits(String),
    #[error("empty runner command")]
    EmptyRunner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub wall_timeout: Duration,
    pub memory_cap: u64,
    pub output_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            wall_timeout: Duration::from_secs(20),
            memory_cap: 16 << 30,
            output_cap: 256 << 20,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.wall_timeout.is_zero() || self.memory_cap == 0 || self.output_cap == 0 {
            return Err(SandboxError::Limits(format!("all limits must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.wall_timeout = t;
        self
    }

    pub fn with_memory_cap(mut self, bytes: u64) -> Self {
        self.memory_cap = bytes;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    WrongOutput,
    Timeout,
    Oom,
    Crash,
    ProtocolError,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::WrongOutput => "wrong_output",
            RunStatus::Timeout => "timeout",
            RunStatus::Oom => "oom",
            RunStatus::Crash => "crash",
            RunStatus::ProtocolError => "protocol_error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// Present iff status is `ok` or `wrong_output`.
    pub value: Option<Value>,
    /// Cost of the measured window, for measured runs that completed.
    pub cost: Option<u64>,
    pub stderr_tail: String,
    /// Human-readable cause for non-ok statuses.
    pub detail: String,
}

impl RunOutcome {
    fn failed(status: RunStatus, detail: impl Into<String>, stderr_tail: String) -> Self {
        RunOutcome {
            status,
            value: None,
            cost: None,
            stderr_tail,
            detail: detail.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn describe(&self) -> String {
        let mut s = format!("{}", self.status);
        if !self.detail.is_empty() {
            s.push_str(": ");
            s.push_str(&self.detail);
        }
        let tail = self.stderr_tail.trim();
        if !tail.is_empty() {
            let last: Vec<&str> = tail.lines().rev().take(3).collect();
            s.push_str(" | stderr: ");
            s.push_str(&last.into_iter().rev().collect::<Vec<_>>().join(" / "));
        }
        s
    }
}

/// The guest runner command: `<program> <args..> <solution_file>
/// <entry_point> <input_file>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuestRunner {
    pub program: OsString,
    pub args: Vec<OsString>,
}

impl GuestRunner {
    pub fn new(program: impl Into<OsString>) -> Self {
        GuestRunner {
            program: program.into(),
            args: Vec::new(),
        }
    }

    /// Splits a command line on whitespace (`python3 runner.py`).
    ///
    /// Guests run in a scratch directory, so words naming existing relative
    /// paths are made absolute here.
    pub fn parse(command: &str) -> Result<Self, SandboxError> {
        let mut words = command.split_whitespace().map(absolutize);
        let program = words.next().ok_or(SandboxError::EmptyRunner)?;
        Ok(GuestRunner {
            program,
            args: words.collect(),
        })
    }
}

fn absolutize(word: &str) -> OsString {
    let path = Path::new(word);
    if path.is_relative() && path.exists() && (word.contains('/') || path.is_file()) {
        if let Ok(abs) = std::fs::canonicalize(path) {
            return abs.into_os_string();
        }
    }
    word.into()
}

/// Runs guests through one runner. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Sandbox {
    runner: GuestRunner,
}

struct Watchdog {
    state: Arc<(Mutex<bool>, Condvar)>,
    fired: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Watchdog {
    fn start(pgid: i32, timeout: Duration) -> Self {
        let state = Arc::new((Mutex::new(false), Condvar::new()));
        let fired = Arc::new(AtomicBool::new(false));
        let (st, fl) = (state.clone(), fired.clone());
        let handle = thread::spawn(move || {
            let (lock, cv) = &*st;
            let done = lock.lock().unwrap_or_else(|p| p.into_inner());
            let (done, res) = cv
                .wait_timeout_while(done, timeout, |d| !*d)
                .unwrap_or_else(|p| p.into_inner());
            if !res.timed_out() || *done {
                return;
            }
            fl.store(true, Ordering::SeqCst);
            // The group leader is not reaped while `done` is false, so the
            // group id cannot have been reused.
            unsafe { libc::killpg(pgid, libc::SIGTERM) };
            let (done, _) = cv
                .wait_timeout_while(done, KILL_GRACE, |d| !*d)
                .unwrap_or_else(|p| p.into_inner());
            if !*done {
                unsafe { libc::killpg(pgid, libc::SIGKILL) };
            }
        });
        Watchdog {
            state,
            fired,
            handle: Some(handle),
        }
    }

    fn disarm(mut self) -> bool {
        {
            let (lock, cv) = &*self.state;
            *lock.lock().unwrap_or_else(|p| p.into_inner()) = true;
            cv.notify_all();
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        self.fired.load(Ordering::SeqCst)
    }
}

/// Harness side of the marker protocol.
struct Protocol {
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    /// The line that ended the window, when it was not `DONE`.
    end_marker: Option<String>,
}

impl Protocol {
    fn read_line(&mut self, cap: u64) -> io::Result<String> {
        let mut buf = Vec::new();
        (&mut self.stdout).take(cap + 1).read_until(b'\n', &mut buf)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }
}

impl RegionMarkers for Protocol {
    fn begin(&mut self) -> Result<(), String> {
        let stdin = self.stdin.as_mut().ok_or("stdin closed")?;
        stdin
            .write_all(b"GO\n")
            .and_then(|_| stdin.flush())
            .map_err(|e| format!("writing GO: {e}"))
    }

    fn wait_end(&mut self) -> Result<(), String> {
        let line = self
            .read_line(MARKER_LINE_CAP)
            .map_err(|e| format!("reading end marker: {e}"))?;
        if line == "DONE\n" {
            Ok(())
        } else {
            let cause = if line.is_empty() {
                "guest exited inside the measured window".to_string()
            } else {
                format!("guest sent {line:?} instead of DONE")
            };
            self.end_marker = Some(line);
            Err(cause)
        }
    }
}

fn spawn_stderr_drain(mut stderr: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut tail: Vec<u8> = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match stderr.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    tail.extend_from_slice(&chunk[..n]);
                    if tail.len() > 2 * STDERR_TAIL_BYTES {
                        tail.drain(..tail.len() - STDERR_TAIL_BYTES);
                    }
                }
            }
        }
        if tail.len() > STDERR_TAIL_BYTES {
            tail.drain(..tail.len() - STDERR_TAIL_BYTES);
        }
        String::from_utf8_lossy(&tail).into_owned()
    })
}

/// Waits for the child to exit without reaping it, kills whatever is left
/// of its process group, then reaps.
fn finish(child: &mut Child, watchdog: Watchdog) -> (io::Result<ExitStatus>, bool) {
    let pid = child.id() as libc::id_t;
    loop {
        let mut info: libc::siginfo_t = unsafe { std::mem::zeroed() };
        let rc = unsafe {
            libc::waitid(libc::P_PID, pid, &mut info, libc::WEXITED | libc::WNOWAIT)
        };
        if rc == 0 || io::Error::last_os_error().raw_os_error() != Some(libc::EINTR) {
            break;
        }
    }
    let timed_out = watchdog.disarm();
    unsafe { libc::killpg(pid as i32, libc::SIGKILL) };
    (child.wait(), timed_out)
}

enum Traffic {
    /// `DONE` and a value line arrived.
    Done(String),
    /// The guest reported an exception.
    Fail,
    /// The guest exited before `READY`.
    NoReady,
    Malformed(String),
    OutputCap,
    /// The measured window ended abnormally.
    Aborted(String),
}

impl Sandbox {
    pub fn new(runner: GuestRunner) -> Self {
        Sandbox { runner }
    }

    pub fn runner(&self) -> &GuestRunner {
        &self.runner
    }

    /// Runs `entry_point` of `solution` on `args` without measuring.
    pub fn run_guest(
        &self,
        solution: &Solution,
        entry_point: &str,
        args: &Args,
        limits: &Limits,
    ) -> RunOutcome {
        match self.run(solution, entry_point, args, limits, None) {
            Ok(outcome) => outcome,
            Err(e) => RunOutcome::failed(RunStatus::Crash, e.to_string(), String::new()),
        }
    }

    /// Runs with a counter around the window between `GO` and `DONE`.
    /// Measurement infrastructure failures are errors; guest failures are
    /// reported in the outcome.
    pub fn run_measured(
        &self,
        solution: &Solution,
        entry_point: &str,
        args: &Args,
        limits: &Limits,
        config: &MeasureConfig,
    ) -> Result<RunOutcome, MeasureError> {
        let backend = config.resolve()?;
        self.run(solution, entry_point, args, limits, Some((config, backend)))
    }

    fn run(
        &self,
        solution: &Solution,
        entry_point: &str,
        args: &Args,
        limits: &Limits,
        measured: Option<(&MeasureConfig, ResolvedBackend)>,
    ) -> Result<RunOutcome, MeasureError> {
        if let Err(e) = limits.validate() {
            return Err(MeasureError::Config(e.to_string()));
        }
        let workdir = tempfile::Builder::new().prefix("dpe-run-").tempdir()?;
        let solution_file = workdir.path().join("solution.src");
        let input_file = workdir.path().join("input.json");
        std::fs::write(&solution_file, &solution.source)?;
        std::fs::write(&input_file, args.encode())?;

        let plan = measured.map(|(cfg, backend)| LaunchPlan::prepare(cfg, backend, workdir.path()));
        let mut command = self.command(plan.as_ref(), &solution_file, entry_point, &input_file);
        let memory_cap = limits.memory_cap;
        let fixed_layout = matches!(plan.as_ref().map(|p| p.backend), Some(ResolvedBackend::Perf | ResolvedBackend::Wall));
        let cpu_pin = measured.and_then(|(cfg, _)| cfg.cpu_pin);
        command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .current_dir(workdir.path());
        unsafe {
            command.pre_exec(move || {
                if libc::setpgid(0, 0) != 0 {
                    return Err(io::Error::last_os_error());
                }
                let as_limit = libc::rlimit {
                    rlim_cur: memory_cap as libc::rlim_t,
                    rlim_max: memory_cap as libc::rlim_t,
                };
                if libc::setrlimit(libc::RLIMIT_AS, &as_limit) != 0 {
                    return Err(io::Error::last_os_error());
                }
                let no_core = libc::rlimit {
                    rlim_cur: 0,
                    rlim_max: 0,
                };
                libc::setrlimit(libc::RLIMIT_CORE, &no_core);
                if fixed_layout {
                    libc::personality(libc::ADDR_NO_RANDOMIZE as libc::c_ulong);
                }
                if let Some(cpu) = cpu_pin {
                    let mut set: libc::cpu_set_t = std::mem::zeroed();
                    libc::CPU_SET(cpu, &mut set);
                    if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
                        return Err(io::Error::last_os_error());
                    }
                }
                Ok(())
            });
        }

        let mut child = match command.spawn() {
            Ok(c) => c,
            Err(e) => {
                return Ok(RunOutcome::failed(
                    RunStatus::Crash,
                    format!("cannot start runner {:?}: {e}", self.runner.program),
                    String::new(),
                ))
            }
        };
        let pid = child.id() as i32;
        let watchdog = Watchdog::start(pid, limits.wall_timeout);
        let stderr = spawn_stderr_drain(child.stderr.take().expect("piped"));
        let mut proto = Protocol {
            stdin: child.stdin.take(),
            stdout: BufReader::new(child.stdout.take().expect("piped")),
            end_marker: None,
        };

        let mut cost = None;
        let mut measure_err = None;
        let traffic = (|| -> Traffic {
            match proto.read_line(MARKER_LINE_CAP) {
                Ok(l) if l == "READY\n" => {}
                Ok(l) if l.is_empty() => return Traffic::NoReady,
                Ok(l) => return Traffic::Malformed(format!("expected READY, got {l:?}")),
                Err(e) => return Traffic::Malformed(format!("reading READY: {e}")),
            }
            match (measured, plan.as_ref()) {
                (Some((cfg, _)), Some(plan)) => {
                    let _guard = measure::measurement_lock();
                    let mut session = match open_counter(pid, cfg, plan) {
                        Ok(s) => s,
                        Err(e) => {
                            measure_err = Some(e);
                            return Traffic::Aborted("counter could not be opened".into());
                        }
                    };
                    match measure_region(&mut session, &mut proto) {
                        Ok(c) => cost = Some(c),
                        Err(MeasureError::Aborted(cause)) => {
                            return match proto.end_marker.as_deref() {
                                Some("FAIL\n") => Traffic::Fail,
                                Some(l) if !l.is_empty() => Traffic::Malformed(cause),
                                _ => Traffic::Aborted(cause),
                            }
                        }
                        Err(e) => {
                            measure_err = Some(e);
                            return Traffic::Aborted("counter failed".into());
                        }
                    }
                }
                _ => {
                    if let Err(e) = proto.begin() {
                        return Traffic::Aborted(e);
                    }
                    if let Err(cause) = proto.wait_end() {
                        return match proto.end_marker.as_deref() {
                            Some("FAIL\n") => Traffic::Fail,
                            Some(l) if !l.is_empty() => Traffic::Malformed(cause),
                            _ => Traffic::Aborted(cause),
                        };
                    }
                }
            }
            match proto.read_line(limits.output_cap) {
                Ok(l) if l.len() as u64 > limits.output_cap => Traffic::OutputCap,
                Ok(l) if l.ends_with('\n') => Traffic::Done(l),
                Ok(l) => Traffic::Malformed(format!("unterminated value line ({} bytes)", l.len())),
                Err(e) => Traffic::Malformed(format!("reading value: {e}")),
            }
        })();

        // Close our ends so a guest blocked on the pipes can exit.
        drop(proto);
        let (status, timed_out) = finish(&mut child, watchdog);
        let stderr_tail = stderr.join().unwrap_or_default();
        if let Some(e) = measure_err {
            return Err(e);
        }
        let exit = status?;
        Ok(classify(traffic, exit, timed_out, stderr_tail, cost, limits))
    }

    fn command(
        &self,
        plan: Option<&LaunchPlan>,
        solution_file: &Path,
        entry_point: &str,
        input_file: &Path,
    ) -> Command {
        let mut argv: Vec<OsString> = plan.map(|p| p.prefix.clone()).unwrap_or_default();
        argv.push(self.runner.program.clone());
        argv.extend(self.runner.args.iter().cloned());
        let mut command = Command::new(&argv[0]);
        command
            .args(&argv[1..])
            .arg(solution_file)
            .arg(entry_point)
            .arg(input_file);
        command
    }

    /// Runs every test, stopping at the first failure.
    pub fn check_correct(
        &self,
        solution: &Solution,
        entry_point: &str,
        tests: &[TestCase],
        limits: &Limits,
    ) -> CorrectnessReport {
        let mut results = Vec::with_capacity(tests.len());
        for (index, test) in tests.iter().enumerate() {
            let outcome = self.run_guest(solution, entry_point, &test.args, limits);
            let result = match outcome.status {
                RunStatus::Ok => {
                    let value = outcome.value.expect("ok outcome has a value");
                    if value.matches(&test.expected) {
                        TestResult {
                            index,
                            status: RunStatus::Ok,
                            detail: String::new(),
                        }
                    } else {
                        TestResult {
                            index,
                            status: RunStatus::WrongOutput,
                            detail: format!(
                                "expected {}, got {}",
                                truncate(&test.expected.encode(), 200),
                                truncate(&value.encode(), 200)
                            ),
                        }
                    }
                }
                status => TestResult {
                    index,
                    status,
                    detail: outcome.describe(),
                },
            };
            let failed = result.status != RunStatus::Ok;
            results.push(result);
            if failed {
                break;
            }
        }
        let first_failure = results.iter().find(|r| r.status != RunStatus::Ok).map(|r| r.index);
        CorrectnessReport {
            passed: first_failure.is_none() && !tests.is_empty(),
            first_failure,
            results,
        }
    }

    /// Runs a generator's `perf_input_gen(scale)` and returns the produced
    /// arguments, or the failed outcome.
    pub fn generate(
        &self,
        generator_source: &str,
        scale: u64,
        limits: &Limits,
    ) -> Result<Args, RunOutcome> {
        let gen = Solution::new("generator", generator_source, "generator");
        let outcome = self.run_guest(&gen, GENERATOR_ENTRY_POINT, &Args(vec![Value::int(scale as i64)]), limits);
        match outcome.status {
            RunStatus::Ok => {
                let value = outcome.value.clone().expect("ok outcome has a value");
                Args::from_generated(value).map_err(|e| RunOutcome {
                    status: RunStatus::ProtocolError,
                    value: None,
                    detail: e.to_string(),
                    ..outcome
                })
            }
            _ => Err(outcome),
        }
    }
}

/// Function every synthesized generator must define.
pub const GENERATOR_ENTRY_POINT: &str = "perf_input_gen";

fn truncate(s: &str, n: usize) -> String {
    if s.len() <= n {
        s.to_string()
    } else {
        let mut end = n;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

fn looks_like_oom(stderr: &str) -> bool {
    OOM_MARKERS.iter().any(|m| stderr.contains(m))
}

fn exit_text(exit: ExitStatus) -> String {
    match (exit.code(), exit.signal()) {
        (Some(c), _) => format!("exit code {c}"),
        (None, Some(s)) => format!("killed by signal {s}"),
        _ => "unknown exit".into(),
    }
}

fn classify(
    traffic: Traffic,
    exit: ExitStatus,
    timed_out: bool,
    stderr_tail: String,
    cost: Option<u64>,
    limits: &Limits,
) -> RunOutcome {
    if timed_out {
        return RunOutcome::failed(
            RunStatus::Timeout,
            format!("exceeded {:.3}s wall limit", limits.wall_timeout.as_secs_f64()),
            stderr_tail,
        );
    }
    let abnormal = !exit.success();
    if abnormal && looks_like_oom(&stderr_tail) {
        return RunOutcome::failed(
            RunStatus::Oom,
            format!("memory cap {} bytes ({})", limits.memory_cap, exit_text(exit)),
            stderr_tail,
        );
    }
    match traffic {
        Traffic::Done(line) => {
            if abnormal {
                return RunOutcome::failed(
                    RunStatus::Crash,
                    format!("{} after DONE", exit_text(exit)),
                    stderr_tail,
                );
            }
            match Value::decode(line.trim_end_matches('\n')) {
                Ok(value) => RunOutcome {
                    status: RunStatus::Ok,
                    value: Some(value),
                    cost,
                    stderr_tail,
                    detail: String::new(),
                },
                Err(e) => RunOutcome::failed(
                    RunStatus::ProtocolError,
                    format!("bad value line: {e}"),
                    stderr_tail,
                ),
            }
        }
        Traffic::Fail => RunOutcome::failed(
            RunStatus::Crash,
            format!("guest raised ({})", exit_text(exit)),
            stderr_tail,
        ),
        Traffic::NoReady => RunOutcome::failed(
            RunStatus::Crash,
            format!("guest failed to load ({})", exit_text(exit)),
            stderr_tail,
        ),
        Traffic::Aborted(cause) if abnormal => RunOutcome::failed(
            RunStatus::Crash,
            format!("{cause} ({})", exit_text(exit)),
            stderr_tail,
        ),
        Traffic::Aborted(cause) => RunOutcome::failed(RunStatus::ProtocolError, cause, stderr_tail),
        Traffic::OutputCap => RunOutcome::failed(
            RunStatus::ProtocolError,
            format!("value exceeds the {} byte output cap", limits.output_cap),
            stderr_tail,
        ),
        Traffic::Malformed(m) => RunOutcome::failed(RunStatus::ProtocolError, m, stderr_tail),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub index: usize,
    pub status: RunStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub passed: bool,
    pub first_failure: Option<usize>,
    /// Results of the tests that ran; testing stops at the first failure.
    pub results: Vec<TestResult>,
}

impl CorrectnessReport {
    pub fn failure(&self) -> Option<&TestResult> {
        self.first_failure.and_then(|i| self.results.get(i))
    }
}

/// Finds an executable installed next to the current one (or one directory
/// up, for test binaries under `deps/`).
pub fn sibling_executable(name: &str) -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?;
    [dir.join(name), dir.parent()?.join(name)]
        .into_iter()
        .find(|p| p.is_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_must_be_positive() {
        assert!(Limits::default().validate().is_ok());
        assert!(Limits::default().with_timeout(Duration::ZERO).validate().is_err());
        assert!(Limits::default().with_memory_cap(0).validate().is_err());
    }

    #[test]
    fn runner_parsing() {
        let r = GuestRunner::parse("python3  runner.py").unwrap();
        assert_eq!(r.program, OsString::from("python3"));
        assert_eq!(r.args, vec![OsString::from("runner.py")]);
        assert!(GuestRunner::parse("  ").is_err());
    }

    #[test]
    fn missing_runner_is_a_crash() {
        let sb = Sandbox::new(GuestRunner::new("/nonexistent/runner"));
        let out = sb.run_guest(
            &Solution::new("s", "", ""),
            "f",
            &Args::default(),
            &Limits::default(),
        );
        assert_eq!(out.status, RunStatus::Crash);
        assert!(out.value.is_none());
    }

    #[test]
    fn oom_heuristic() {
        assert!(looks_like_oom("memory allocation of 16777216 bytes failed"));
        assert!(looks_like_oom("Traceback ...\nMemoryError"));
        assert!(!looks_like_oom("ValueError: nope"));
    }

    #[test]
    fn describe_includes_stderr_tail() {
        let o = RunOutcome::failed(RunStatus::Crash, "boom", "a\nb\nc\nd\n".into());
        assert_eq!(o.describe(), "crash: boom | stderr: b / c / d");
    }
}
