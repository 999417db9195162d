use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use log::warn;
use serde::Deserialize;

use super::{Toolchain, COVERAGE_DIR, SOURCE_FILE};
use crate::error::{Error, Result};
use crate::spectrum::{CoverageMatrix, LineId};

const COUNTER_FILE: &str = "src.gcda";

#[derive(Debug, Deserialize)]
struct GcovReport {
    #[serde(default)]
    files: Vec<GcovFile>,
}

#[derive(Debug, Deserialize)]
struct GcovFile {
    file: String,
    #[serde(default)]
    lines: Vec<GcovLine>,
}

#[derive(Debug, Deserialize)]
struct GcovLine {
    line_number: u32,
    count: u64,
}

pub(super) fn reset_counters(workdir: &Path) -> Result<()> {
    let path = workdir.join(COUNTER_FILE);
    match fs::remove_file(&path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn report_path(workdir: &Path, test_id: &str) -> PathBuf {
    let name: String = test_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    workdir.join(COVERAGE_DIR).join(format!("{name}.json"))
}

/// Converts the counters left by the last test run into `cov/<test>.json`
/// and clears them. When the run left no counters (a crash before exit
/// handlers ran), no report is written.
pub fn snapshot_coverage(toolchain: &Toolchain, workdir: &Path, test_id: &str) -> Result<()> {
    let dest = report_path(workdir, test_id);
    let cov_dir = workdir.join(COVERAGE_DIR);
    fs::create_dir_all(&cov_dir).map_err(|e| Error::io(&cov_dir, e))?;
    let _ = fs::remove_file(&dest);
    if !workdir.join(COUNTER_FILE).exists() {
        return Ok(());
    }
    let out = Command::new(&toolchain.gcov)
        .args(["--json-format", "--stdout", COUNTER_FILE])
        .current_dir(workdir)
        .env("LC_ALL", "C")
        .output()
        .map_err(|e| Error::Environment(format!("cannot run `{}`: {e}", toolchain.gcov)))?;
    if out.status.success() && !out.stdout.is_empty() {
        fs::write(&dest, &out.stdout).map_err(|e| Error::io(&dest, e))?;
    } else {
        warn!("gcov failed for test {test_id}: {}", String::from_utf8_lossy(&out.stderr).trim());
    }
    reset_counters(workdir)
}

/// Lines of `src.c` with a positive execution count in one gcov JSON report.
pub fn parse_gcov_json(text: &str) -> Result<BTreeSet<LineId>> {
    let report: GcovReport = serde_json::from_str(text)?;
    let mut lines = BTreeSet::new();
    for file in report.files.iter().filter(|f| is_candidate_source(&f.file)) {
        for line in file.lines.iter().filter(|l| l.count > 0 && l.line_number > 0) {
            lines.insert(LineId { file: SOURCE_FILE.to_string(), line: line.line_number });
        }
    }
    Ok(lines)
}

fn is_candidate_source(path: &str) -> bool {
    Path::new(path).file_name().is_some_and(|n| n == SOURCE_FILE)
}

/// Builds the spectrum from `cov/` reports, one row per test in order.
/// A test with a missing or unreadable report gets an empty row and a
/// warning; the returned strings repeat those warnings for feedback.
pub fn collect_coverage(workdir: &Path, per_test: &[String]) -> (CoverageMatrix, Vec<String>) {
    let mut matrix = CoverageMatrix::new();
    let mut warnings = Vec::new();
    for test_id in per_test {
        let path = report_path(workdir, test_id);
        let row = fs::read_to_string(&path).map_err(|e| format!("no coverage data for test {test_id}: {e}")).and_then(
            |text| parse_gcov_json(&text).map_err(|e| format!("corrupt coverage data for test {test_id}: {e}")),
        );
        match row {
            Ok(lines) => matrix.insert_row(test_id.clone(), lines),
            Err(msg) => {
                warn!("{msg}");
                warnings.push(msg);
                matrix.insert_row(test_id.clone(), []);
            }
        }
    }
    (matrix, warnings)
}
