//! Exact instruction counts through valgrind's callgrind tool, for machines
//! without PMU access. The measured window is the guest's region symbol:
//! collection is toggled on entry and a profile part is dumped on exit, so
//! the count is available as soon as the guest reports `DONE`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;

pub(crate) fn valgrind_program() -> OsString {
    std::env::var_os("DPE_VALGRIND").unwrap_or_else(|| "valgrind".into())
}

pub(crate) fn available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        Command::new(valgrind_program())
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    })
}

/// Arguments that wrap the runner command; `out_base` receives the profile
/// and `<out_base>.1` the region dump.
pub(crate) fn wrapper_args(out_base: &Path, region_symbol: &str) -> Vec<OsString> {
    let mut out_file = OsString::from("--callgrind-out-file=");
    out_file.push(out_base);
    vec![
        "-q".into(),
        "--tool=callgrind".into(),
        out_file,
        "--collect-atstart=no".into(),
        format!("--toggle-collect={region_symbol}").into(),
        format!("--dump-after={region_symbol}").into(),
        "--error-exitcode=0".into(),
    ]
}

pub(crate) fn region_dump_path(out_base: &Path) -> PathBuf {
    let mut p = out_base.as_os_str().to_owned();
    p.push(".1");
    PathBuf::from(p)
}

/// Reads the `totals:` (or `summary:`) line of a callgrind profile.
pub(crate) fn parse_total(text: &str) -> Option<u64> {
    let mut summary = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("totals:") {
            return rest.split_whitespace().next()?.parse().ok();
        }
        if let Some(rest) = line.strip_prefix("summary:") {
            summary = rest.split_whitespace().next().and_then(|v| v.parse().ok());
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_totals_and_summary() {
        let text = "version: 1\nevents: Ir\nsummary: 50179\ntotals: 50179\n";
        assert_eq!(parse_total(text), Some(50179));
        assert_eq!(parse_total("events: Ir\nsummary: 12\n"), Some(12));
        assert_eq!(parse_total("events: Ir\n"), None);
    }

    #[test]
    fn dump_path_appends_part_number() {
        assert_eq!(region_dump_path(Path::new("/t/cg.out")), PathBuf::from("/t/cg.out.1"));
    }
}
