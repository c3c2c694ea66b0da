//! Suite directory format.
//!
//! ```text
//! <suite>/suite.jsonl                               one task per line
//! <suite>/inputs/<task_id>.bin.zst                  perf inputs over 1 MiB
//! <suite>/references/<task_id>/<solution_id>.src    reference sources
//! ```
//!
//! Ids are percent-escaped when used as file names. Rendering is
//! deterministic, so the suite hash is a hash of the rendered files.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{CostUnit, InvariantError, ReferenceEntry, ReferenceSet, Solution, Task, TestCase};
use crate::value::{Args, DecodeError};

pub const SUITE_FILE: &str = "suite.jsonl";
pub const INPUTS_DIR: &str = "inputs";
pub const REFERENCES_DIR: &str = "references";
/// Serialized perf inputs larger than this go to a compressed sidecar.
pub const SIDECAR_THRESHOLD: usize = 1 << 20;
const ZSTD_LEVEL: i32 = 3;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: record {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Percent-escapes everything outside `[A-Za-z0-9_.-]`, plus a leading dot.
pub fn escape_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for (i, b) in id.bytes().enumerate() {
        let plain = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0);
        if plain {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    if out.is_empty() {
        out.push_str("%");
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PerfInputRecord {
    Inline(Args),
    Sidecar(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceRecord {
    solution_id: String,
    origin: String,
    cumulative_ratio: f64,
    curation_mean_cost: f64,
    source_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferencesRecord {
    unit: CostUnit,
    entries: Vec<ReferenceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    task_id: String,
    instruction: String,
    entry_point: String,
    ground_truth: String,
    correctness_tests: Vec<TestCase>,
    perf_input: Option<PerfInputRecord>,
    references: Option<ReferencesRecord>,
}

/// Renders a suite into relative path → file bytes.
pub fn render_suite(tasks: &[Task]) -> Result<BTreeMap<PathBuf, Vec<u8>>, SuiteError> {
    super::validate_tasks(tasks)?;
    let mut files = BTreeMap::new();
    let mut lines = Vec::new();
    for task in tasks {
        let escaped = escape_id(&task.task_id);
        let perf_input = match &task.perf_input {
            None => None,
            Some(args) => {
                let encoded = args.encode();
                if encoded.len() > SIDECAR_THRESHOLD {
                    let rel = format!("{INPUTS_DIR}/{escaped}.bin.zst");
                    let packed = zstd::encode_all(encoded.as_bytes(), ZSTD_LEVEL).map_err(
                        |source| SuiteError::Io {
                            path: PathBuf::from(&rel),
                            source,
                        },
                    )?;
                    files.insert(PathBuf::from(&rel), packed);
                    Some(PerfInputRecord::Sidecar(rel))
                } else {
                    Some(PerfInputRecord::Inline(args.clone()))
                }
            }
        };
        let references = task.references.as_ref().map(|refs| ReferencesRecord {
            unit: refs.unit,
            entries: refs
                .entries
                .iter()
                .map(|e| {
                    let rel = format!(
                        "{REFERENCES_DIR}/{escaped}/{}.src",
                        escape_id(&e.solution.solution_id)
                    );
                    files.insert(PathBuf::from(&rel), e.solution.source.clone().into_bytes());
                    ReferenceRecord {
                        solution_id: e.solution.solution_id.clone(),
                        origin: e.solution.origin.clone(),
                        cumulative_ratio: e.cumulative_ratio,
                        curation_mean_cost: e.curation_mean_cost,
                        source_file: rel,
                    }
                })
                .collect(),
        });
        let record = TaskRecord {
            task_id: task.task_id.clone(),
            instruction: task.instruction.clone(),
            entry_point: task.entry_point.clone(),
            ground_truth: task.ground_truth.clone(),
            correctness_tests: task.correctness_tests.clone(),
            perf_input,
            references,
        };
        let line = serde_json::to_string(&record).map_err(|e| SuiteError::Parse {
            path: PathBuf::from(SUITE_FILE),
            line: lines.len() + 1,
            message: e.to_string(),
        })?;
        lines.push(line);
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    files.insert(PathBuf::from(SUITE_FILE), body.into_bytes());
    Ok(files)
}

/// Writes `tasks` as a suite directory, replacing any previous suite files
/// there.
pub fn save_suite(tasks: &[Task], dir: &Path) -> Result<(), SuiteError> {
    let files = render_suite(tasks)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for sub in [INPUTS_DIR, REFERENCES_DIR] {
        let p = dir.join(sub);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(io_err(&p))?;
        }
    }
    for (rel, bytes) in &files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

/// SHA-256 over the rendered suite files, hex-encoded.
pub fn suite_hash(tasks: &[Task]) -> Result<String, SuiteError> {
    let files = render_suite(tasks)?;
    let mut h = Sha256::new();
    for (rel, bytes) in &files {
        let name = rel.to_string_lossy();
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn suite_dir(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.to_path_buf(), path.join(SUITE_FILE))
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (dir, path.to_path_buf())
    }
}

fn read_relative(dir: &Path, rel: &str, file: &Path, line: usize) -> Result<Vec<u8>, SuiteError> {
    let rel_path = Path::new(rel);
    if rel_path.is_absolute() || rel_path.components().any(|c| c.as_os_str() == "..") {
        return Err(SuiteError::Parse {
            path: file.to_path_buf(),
            line,
            message: format!("path {rel:?} escapes the suite directory"),
        });
    }
    let full = dir.join(rel_path);
    fs::read(&full).map_err(io_err(&full))
}

/// Loads a suite directory (or its `suite.jsonl`). Tasks come back in file
/// order.
pub fn load_suite(path: &Path) -> Result<Vec<Task>, SuiteError> {
    let (dir, file) = suite_dir(path);
    let reader = io::BufReader::new(fs::File::open(&file).map_err(io_err(&file))?);
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(&file))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| SuiteError::Parse {
            path: file.clone(),
            line: lineno,
            message,
        };
        let record: TaskRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let perf_input = match record.perf_input {
            None => None,
            Some(PerfInputRecord::Inline(args)) => Some(args),
            Some(PerfInputRecord::Sidecar(rel)) => {
                let packed = read_relative(&dir, &rel, &file, lineno)?;
                let raw = zstd::decode_all(packed.as_slice())
                    .map_err(|e| parse(format!("sidecar {rel}: {e}")))?;
                let text = String::from_utf8(raw)
                    .map_err(|e| parse(format!("sidecar {rel}: {e}")))?;
                Some(
                    Args::decode(&text)
                        .map_err(|e: DecodeError| parse(format!("sidecar {rel}: {e}")))?,
                )
            }
        };
        let references = match record.references {
            None => None,
            Some(refs) => {
                let mut entries = Vec::with_capacity(refs.entries.len());
                for r in refs.entries {
                    let bytes = read_relative(&dir, &r.source_file, &file, lineno)?;
                    let source = String::from_utf8(bytes)
                        .map_err(|e| parse(format!("{}: {e}", r.source_file)))?;
                    entries.push(ReferenceEntry {
                        solution: Solution::new(r.solution_id, source, r.origin),
                        cumulative_ratio: r.cumulative_ratio,
                        curation_mean_cost: r.curation_mean_cost,
                    });
                }
                Some(ReferenceSet {
                    unit: refs.unit,
                    entries,
                })
            }
        };
        let task = Task {
            task_id: record.task_id,
            instruction: record.instruction,
            entry_point: record.entry_point,
            ground_truth: record.ground_truth,
            correctness_tests: record.correctness_tests,
            perf_input,
            references,
        };
        task.validate()?;
        if !seen.insert(task.task_id.clone()) {
            return Err(InvariantError::Task {
                task_id: task.task_id,
                reason: format!("duplicate task_id (record {lineno})"),
            }
            .into());
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// One candidate or pool solution for a task, as stored in solution files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub task_id: String,
    pub solution_id: String,
    pub source: String,
    #[serde(default)]
    pub origin: String,
}

/// Reads a JSONL file of [`SolutionRecord`]s grouped by task id, keeping
/// file order within each task.
pub fn load_solutions(path: &Path) -> Result<BTreeMap<String, Vec<Solution>>, SuiteError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out: BTreeMap<String, Vec<Solution>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: SolutionRecord = serde_json::from_str(line).map_err(|e| SuiteError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let pool = out.entry(r.task_id.clone()).or_default();
        if pool.iter().any(|s| s.solution_id == r.solution_id) {
            return Err(InvariantError::Task {
                task_id: r.task_id,
                reason: format!("duplicate solution_id {}", r.solution_id),
            }
            .into());
        }
        pool.push(Solution::new(r.solution_id, r.source, r.origin));
    }
    Ok(out)
}

pub fn save_solutions(
    solutions: &BTreeMap<String, Vec<Solution>>,
    path: &Path,
) -> Result<(), SuiteError> {
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for (task_id, pool) in solutions {
        for s in pool {
            let rec = SolutionRecord {
                task_id: task_id.clone(),
                solution_id: s.solution_id.clone(),
                source: s.source.clone(),
                origin: s.origin.clone(),
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(f, "{line}").map_err(io_err(path))?;
        }
    }
    f.flush().map_err(io_err(path))
}
