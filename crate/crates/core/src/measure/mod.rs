//! Cost measurement: counter sessions around the guest's measured window,
//! repeated profiling, and the statistics used by filtering and clustering.
//!
//! Three backends produce costs:
//!
//! * `perf` counts retired user-mode instructions with `perf_event_open(2)`;
//! * `callgrind` counts the same quantity exactly under valgrind, for hosts
//!   whose kernel exposes no hardware PMU (VMs, containers);
//! * `wall` reads a monotonic clock and reports nanoseconds.
//!
//! All profiling is serialized through [`measurement_lock`].

mod callgrind;
mod perf;
pub mod stats;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::model::{CostProfile, CostUnit};
use crate::model::Solution;
use crate::sandbox::{Limits, RunOutcome, RunStatus, Sandbox};
use crate::value::Args;

pub use stats::{percentile_nearest_rank, stats_cv, StatsError};

/// Environment variable whose value replaces the default advice printed
/// when the kernel refuses counter access.
pub const PARANOID_HINT_ENV: &str = "DPE_PERF_PARANOID_HINT";

const DEFAULT_PARANOID_HINT: &str = "lower kernel.perf_event_paranoid (e.g. `sysctl -w kernel.perf_event_paranoid=1`) or grant CAP_PERFMON";

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("instruction counter unavailable: {0}")]
    CounterUnavailable(String),
    #[error("permission denied opening the instruction counter ({source}); {hint}")]
    Permission {
        source: std::io::Error,
        hint: String,
    },
    #[error("measurement aborted: {0}")]
    Aborted(String),
    #[error("counter used out of order: {0}")]
    State(String),
    #[error("counter I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("guest run failed during profiling ({status}): {detail}")]
    Run { status: RunStatus, detail: String },
    #[error("invalid measurement config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterBackend {
    Auto,
    Perf,
    Callgrind,
    Wall,
}

impl FromStr for CounterBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "perf" => Ok(Self::Perf),
            "callgrind" => Ok(Self::Callgrind),
            "wall" => Ok(Self::Wall),
            other => Err(format!("unknown counter backend {other:?}")),
        }
    }
}

impl fmt::Display for CounterBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Perf => "perf",
            Self::Callgrind => "callgrind",
            Self::Wall => "wall",
        })
    }
}

/// How one profiling invocation measures cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub unit: CostUnit,
    /// Fresh guest processes per profile (k).
    pub repetitions: u32,
    pub cpu_pin: Option<usize>,
    pub count_kernel: bool,
    pub backend: CounterBackend,
    /// Function the callgrind backend toggles collection on.
    pub region_symbol: String,
}

impl MeasureConfig {
    pub fn new(unit: CostUnit) -> Self {
        MeasureConfig {
            unit,
            repetitions: match unit {
                CostUnit::Instructions => 3,
                CostUnit::WallNs => 5,
            },
            cpu_pin: None,
            count_kernel: false,
            backend: CounterBackend::Auto,
            region_symbol: crate::stub_guest::REGION_SYMBOL.to_string(),
        }
    }

    pub fn instructions() -> Self {
        Self::new(CostUnit::Instructions)
    }

    pub fn wall() -> Self {
        Self::new(CostUnit::WallNs)
    }

    pub fn with_repetitions(mut self, k: u32) -> Self {
        self.repetitions = k;
        self
    }

    pub fn with_backend(mut self, backend: CounterBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.repetitions == 0 {
            return Err(MeasureError::Config("repetitions must be >= 1".into()));
        }
        match (self.unit, self.backend) {
            (CostUnit::WallNs, CounterBackend::Perf | CounterBackend::Callgrind) => Err(
                MeasureError::Config(format!("backend {} counts instructions", self.backend)),
            ),
            (CostUnit::Instructions, CounterBackend::Wall) => Err(MeasureError::Config(
                "the wall backend reports wall_ns, not instructions".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Picks the concrete backend, falling back from perf to callgrind when
    /// the host has no usable PMU.
    pub fn resolve(&self) -> Result<ResolvedBackend, MeasureError> {
        self.validate()?;
        match (self.unit, self.backend) {
            (CostUnit::WallNs, _) => Ok(ResolvedBackend::Wall),
            (CostUnit::Instructions, CounterBackend::Perf) => {
                perf_probe(self.count_kernel)?;
                Ok(ResolvedBackend::Perf)
            }
            (CostUnit::Instructions, CounterBackend::Callgrind) => {
                if callgrind::available() {
                    Ok(ResolvedBackend::Callgrind)
                } else {
                    Err(MeasureError::CounterUnavailable(
                        "valgrind not found (set DPE_VALGRIND or install valgrind)".into(),
                    ))
                }
            }
            (CostUnit::Instructions, _) => match perf_probe(self.count_kernel) {
                Ok(()) => Ok(ResolvedBackend::Perf),
                Err(perf_err) if callgrind::available() => {
                    log::debug!("perf unavailable ({perf_err}); using callgrind");
                    Ok(ResolvedBackend::Callgrind)
                }
                Err(perf_err) => Err(perf_err),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedBackend {
    Perf,
    Callgrind,
    Wall,
}

impl ResolvedBackend {
    pub fn unit(self) -> CostUnit {
        match self {
            ResolvedBackend::Wall => CostUnit::WallNs,
            _ => CostUnit::Instructions,
        }
    }
}

impl fmt::Display for ResolvedBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResolvedBackend::Perf => "perf",
            ResolvedBackend::Callgrind => "callgrind",
            ResolvedBackend::Wall => "wall",
        })
    }
}

/// Spawn-time preparation some backends need (callgrind wraps the runner).
#[derive(Debug, Clone)]
pub struct LaunchPlan {
    pub backend: ResolvedBackend,
    pub prefix: Vec<OsString>,
    callgrind_out: Option<PathBuf>,
}

impl LaunchPlan {
    pub fn prepare(
        config: &MeasureConfig,
        backend: ResolvedBackend,
        workdir: &Path,
    ) -> LaunchPlan {
        match backend {
            ResolvedBackend::Callgrind => {
                let out = workdir.join("callgrind.out");
                let mut prefix = vec![callgrind::valgrind_program()];
                prefix.extend(callgrind::wrapper_args(&out, &config.region_symbol));
                LaunchPlan {
                    backend,
                    prefix,
                    callgrind_out: Some(out),
                }
            }
            _ => LaunchPlan {
                backend,
                prefix: Vec::new(),
                callgrind_out: None,
            },
        }
    }
}

fn perf_probe(count_kernel: bool) -> Result<(), MeasureError> {
    perf::InstructionCounter::open(0, count_kernel)
        .map(drop)
        .map_err(perf_open_error)
}

fn perf_open_error(e: perf::OpenError) -> MeasureError {
    match e {
        perf::OpenError::Unavailable(err) => {
            MeasureError::CounterUnavailable(format!("perf_event_open: {err}"))
        }
        perf::OpenError::Permission(source) => MeasureError::Permission {
            source,
            hint: std::env::var(PARANOID_HINT_ENV)
                .unwrap_or_else(|_| DEFAULT_PARANOID_HINT.to_string()),
        },
        perf::OpenError::Other(err) => MeasureError::Io(err),
    }
}

pub fn perf_available() -> bool {
    perf_probe(false).is_ok()
}

pub fn callgrind_available() -> bool {
    callgrind::available()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Armed,
    Counting,
    Stopped,
}

#[derive(Debug)]
enum SessionImpl {
    Perf(perf::InstructionCounter),
    Callgrind { dump: PathBuf },
    Wall { started: Option<Instant> },
}

/// One counting window on one guest process.
#[derive(Debug)]
pub struct CounterSession {
    pid: i32,
    unit: CostUnit,
    state: SessionState,
    accumulated: u64,
    imp: SessionImpl,
}

/// Opens an armed counter for `pid`, spawned according to `plan`.
pub fn open_counter(
    pid: i32,
    config: &MeasureConfig,
    plan: &LaunchPlan,
) -> Result<CounterSession, MeasureError> {
    config.validate()?;
    if plan.backend.unit() != config.unit {
        return Err(MeasureError::Config(format!(
            "launch plan backend {} does not measure {}",
            plan.backend, config.unit
        )));
    }
    let imp = match plan.backend {
        ResolvedBackend::Perf => {
            let counter = perf::InstructionCounter::open(pid, config.count_kernel)
                .map_err(perf_open_error)?;
            counter.reset()?;
            SessionImpl::Perf(counter)
        }
        ResolvedBackend::Callgrind => SessionImpl::Callgrind {
            dump: callgrind::region_dump_path(
                plan.callgrind_out
                    .as_deref()
                    .ok_or_else(|| MeasureError::Config("callgrind plan without output".into()))?,
            ),
        },
        ResolvedBackend::Wall => SessionImpl::Wall { started: None },
    };
    Ok(CounterSession {
        pid,
        unit: config.unit,
        state: SessionState::Armed,
        accumulated: 0,
        imp,
    })
}

impl CounterSession {
    pub fn pid(&self) -> i32 {
        self.pid
    }

    pub fn unit(&self) -> CostUnit {
        self.unit
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn accumulated(&self) -> u64 {
        self.accumulated
    }

    pub fn enable(&mut self) -> Result<(), MeasureError> {
        if self.state == SessionState::Counting {
            return Err(MeasureError::State("enable while counting".into()));
        }
        match &mut self.imp {
            SessionImpl::Perf(c) => c.enable()?,
            SessionImpl::Callgrind { .. } => {}
            SessionImpl::Wall { started } => *started = Some(Instant::now()),
        }
        self.state = SessionState::Counting;
        Ok(())
    }

    /// Stops counting and returns the total accumulated so far.
    pub fn disable(&mut self) -> Result<u64, MeasureError> {
        if self.state != SessionState::Counting {
            return Err(MeasureError::State("disable while not counting".into()));
        }
        let window = match &mut self.imp {
            SessionImpl::Perf(c) => {
                c.disable()?;
                c.read()?.saturating_sub(self.accumulated)
            }
            SessionImpl::Callgrind { dump } => {
                let text = std::fs::read_to_string(&*dump).map_err(|e| {
                    MeasureError::Aborted(format!(
                        "no callgrind region dump at {} ({e}); does the runner export the region symbol?",
                        dump.display()
                    ))
                })?;
                callgrind::parse_total(&text).ok_or_else(|| {
                    MeasureError::Aborted("callgrind dump without totals".into())
                })?
            }
            SessionImpl::Wall { started } => {
                let t0 = started.take().expect("set by enable");
                t0.elapsed().as_nanos().min(u64::MAX as u128) as u64
            }
        };
        self.accumulated = self.accumulated.saturating_add(window);
        self.state = SessionState::Stopped;
        Ok(self.accumulated)
    }

    fn abort(&mut self) {
        if let SessionImpl::Perf(c) = &self.imp {
            let _ = c.disable();
        }
        self.state = SessionState::Stopped;
    }
}

/// The two program points delimiting a measured window, as seen from the
/// harness side of the marker protocol.
pub trait RegionMarkers {
    /// Releases the guest into its measured window.
    fn begin(&mut self) -> Result<(), String>;
    /// Blocks until the guest reports the end of the window.
    fn wait_end(&mut self) -> Result<(), String>;
}

/// Counts between `markers.begin()` and the end marker; leaves the session
/// stopped either way.
pub fn measure_region(
    session: &mut CounterSession,
    markers: &mut dyn RegionMarkers,
) -> Result<u64, MeasureError> {
    if session.state != SessionState::Armed {
        return Err(MeasureError::State("measure_region needs an armed session".into()));
    }
    session.enable()?;
    if let Err(cause) = markers.begin() {
        session.abort();
        return Err(MeasureError::Aborted(cause));
    }
    match markers.wait_end() {
        Ok(()) => session.disable(),
        Err(cause) => {
            session.abort();
            Err(MeasureError::Aborted(cause))
        }
    }
}

static MEASUREMENT_LOCK: Mutex<()> = Mutex::new(());

/// Serializes counting windows machine-wide (within this process).
pub fn measurement_lock() -> MutexGuard<'static, ()> {
    MEASUREMENT_LOCK
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Runs `solution` on `input` in `config.repetitions` fresh processes and
/// summarizes the window costs.
pub fn profile(
    sandbox: &Sandbox,
    solution: &Solution,
    entry_point: &str,
    input: &Args,
    limits: &Limits,
    config: &MeasureConfig,
) -> Result<CostProfile, MeasureError> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.repetitions as usize);
    for _ in 0..config.repetitions {
        let outcome: RunOutcome = sandbox.run_measured(solution, entry_point, input, limits, config)?;
        match (outcome.status, outcome.cost) {
            (RunStatus::Ok, Some(cost)) => runs.push(cost),
            (status, _) => {
                return Err(MeasureError::Run {
                    status,
                    detail: outcome.describe(),
                })
            }
        }
    }
    Ok(CostProfile::from_runs(config.unit, runs)?)
}

/// Host description recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineFingerprint {
    pub cpu_model: String,
    pub logical_cpus: usize,
    pub kernel: String,
    pub perf_instructions: bool,
    pub callgrind: bool,
}

impl MachineFingerprint {
    pub fn detect() -> Self {
        static CACHED: OnceLock<MachineFingerprint> = OnceLock::new();
        CACHED
            .get_or_init(|| {
                let cpuinfo = std::fs::read_to_string("/proc/cpuinfo").unwrap_or_default();
                let cpu_model = cpuinfo
                    .lines()
                    .find_map(|l| {
                        l.strip_prefix("model name")
                            .and_then(|r| r.split_once(':'))
                            .map(|(_, v)| v.trim().to_string())
                    })
                    .unwrap_or_else(|| "unknown".into());
                let kernel = std::fs::read_to_string("/proc/sys/kernel/osrelease")
                    .map(|s| s.trim().to_string())
                    .unwrap_or_else(|_| "unknown".into());
                MachineFingerprint {
                    cpu_model,
                    logical_cpus: std::thread::available_parallelism()
                        .map(|n| n.get())
                        .unwrap_or(1),
                    kernel,
                    perf_instructions: perf_available(),
                    callgrind: callgrind_available(),
                }
            })
            .clone()
    }
}
