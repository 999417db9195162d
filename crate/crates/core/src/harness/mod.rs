//! Compile, run and measure candidate programs.
//!
//! Each evaluation happens in its own directory with this layout:
//!
//! ```text
//! src.c            candidate source
//! src.o, a.out     instrumented object and executable
//! src.gcno         coverage notes (compile time)
//! src.gcda         coverage counters (reset before every test)
//! cov/<test>.json  per-test coverage as reported by `gcov --json-format`
//! ```

mod compare;
mod compile;
mod coverage;
mod exec;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use compare::compare_output;
pub use compile::{compile_with_coverage, parse_diagnostics};
pub use coverage::{collect_coverage, parse_gcov_json, snapshot_coverage};
pub use exec::run_test;

use crate::error::{Error, Result};
use crate::spectrum::{CoverageMatrix, TestVerdict};

pub const SOURCE_FILE: &str = "src.c";
pub const BINARY_FILE: &str = "a.out";
pub const COVERAGE_DIR: &str = "cov";

pub const DEFAULT_TEST_TIMEOUT: Duration = Duration::from_secs(120);
/// Extra time allowed for killing a timed-out process and draining its pipes.
pub const KILL_GRACE: Duration = Duration::from_secs(5);
pub const DEFAULT_MEMORY_LIMIT: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub code: String,
    pub label: String,
}

impl SourceUnit {
    pub fn new(code: impl Into<String>, label: impl Into<String>) -> Result<Self> {
        let code = code.into();
        if code.trim().is_empty() {
            return Err(Error::InvalidInput("source code is empty".into()));
        }
        Ok(Self { code, label: label.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<u32>,
    /// The compiler's message line, verbatim.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub binary_path: Option<PathBuf>,
    /// Full compiler and linker output.
    pub log: String,
}

impl CompileResult {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub test_id: String,
    #[serde(with = "lossy_bytes")]
    pub stdin: Vec<u8>,
    #[serde(with = "lossy_bytes")]
    pub expected_stdout: Vec<u8>,
}

impl TestSpec {
    pub fn new(test_id: impl Into<String>, stdin: impl Into<Vec<u8>>, expected: impl Into<Vec<u8>>) -> Self {
        Self { test_id: test_id.into(), stdin: stdin.into(), expected_stdout: expected.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ExitStatus {
    Exited(i32),
    Signaled(String),
    /// The test never ran because the candidate did not compile.
    NotRun,
}

impl fmt::Display for ExitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitStatus::Exited(code) => write!(f, "exit code {code}"),
            ExitStatus::Signaled(sig) => write!(f, "killed by {sig}"),
            ExitStatus::NotRun => f.write_str("not run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub test_id: String,
    pub passed: bool,
    pub timed_out: bool,
    pub exit_status: ExitStatus,
    #[serde(with = "lossy_bytes")]
    pub actual_stdout: Vec<u8>,
    #[serde(with = "lossy_bytes")]
    pub stderr: Vec<u8>,
    /// Wall-clock seconds.
    pub duration: f64,
}

impl ExecutionRecord {
    pub fn not_run(test_id: impl Into<String>) -> Self {
        Self {
            test_id: test_id.into(),
            passed: false,
            timed_out: false,
            exit_status: ExitStatus::NotRun,
            actual_stdout: Vec::new(),
            stderr: Vec::new(),
            duration: 0.0,
        }
    }

    pub fn verdict(&self) -> TestVerdict {
        TestVerdict { test_id: self.test_id.clone(), passed: self.passed, timed_out: self.timed_out }
    }

    /// True when the process ended abnormally: a signal, a timeout or a
    /// non-zero exit status.
    pub fn abnormal(&self) -> bool {
        self.timed_out || !matches!(self.exit_status, ExitStatus::Exited(0) | ExitStatus::NotRun)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxLimits {
    /// Address-space limit in bytes for the test process.
    pub memory_bytes: u64,
    /// Run the test in a fresh network namespace when the host allows it.
    pub isolate_network: bool,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        Self { memory_bytes: DEFAULT_MEMORY_LIMIT, isolate_network: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchain {
    pub cc: String,
    pub gcov: String,
}

impl Default for Toolchain {
    fn default() -> Self {
        Self { cc: "gcc".into(), gcov: "gcov".into() }
    }
}

impl Toolchain {
    /// First line of `--version` for the compiler and gcov.
    pub fn versions(&self) -> Result<(String, String)> {
        Ok((first_version_line(&self.cc)?, first_version_line(&self.gcov)?))
    }
}

fn first_version_line(program: &str) -> Result<String> {
    let out = std::process::Command::new(program)
        .arg("--version")
        .output()
        .map_err(|e| Error::Environment(format!("cannot run `{program}`: {e}")))?;
    Ok(String::from_utf8_lossy(&out.stdout).lines().next().unwrap_or_default().to_string())
}

/// Everything observed when one candidate is compiled and run against a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub compile: CompileResult,
    pub outcomes: Vec<ExecutionRecord>,
    pub coverage: CoverageMatrix,
    /// Coverage problems such as a test that crashed before flushing counters.
    pub coverage_warnings: Vec<String>,
}

impl Evaluation {
    pub fn failing(&self) -> Vec<String> {
        self.outcomes.iter().filter(|o| !o.passed).map(|o| o.test_id.clone()).collect()
    }

    pub fn verdicts(&self) -> Vec<TestVerdict> {
        self.outcomes.iter().map(ExecutionRecord::verdict).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harness {
    pub toolchain: Toolchain,
    pub timeout: Duration,
    pub limits: SandboxLimits,
}

impl Default for Harness {
    fn default() -> Self {
        Self { toolchain: Toolchain::default(), timeout: DEFAULT_TEST_TIMEOUT, limits: SandboxLimits::default() }
    }
}

impl Harness {
    pub fn with_timeout(timeout: Duration) -> Self {
        Self { timeout, ..Self::default() }
    }

    /// Compiles `source` in `workdir` and runs every test with per-test
    /// coverage. A compile failure is not an error: every test is then
    /// reported as failing with [`ExitStatus::NotRun`] and the spectrum is
    /// empty.
    pub fn evaluate(&self, source: &SourceUnit, tests: &[TestSpec], workdir: &Path) -> Result<Evaluation> {
        let compile = compile_with_coverage(&self.toolchain, source, workdir)?;
        let Some(binary) = compile.binary_path.clone() else {
            return Ok(Evaluation {
                compile,
                outcomes: tests.iter().map(|t| ExecutionRecord::not_run(&t.test_id)).collect(),
                coverage: CoverageMatrix::new(),
                coverage_warnings: Vec::new(),
            });
        };

        let mut outcomes = Vec::with_capacity(tests.len());
        for test in tests {
            coverage::reset_counters(workdir)?;
            outcomes.push(run_test(&binary, test, self.timeout, &self.limits)?);
            snapshot_coverage(&self.toolchain, workdir, &test.test_id)?;
        }
        let ids: Vec<String> = tests.iter().map(|t| t.test_id.clone()).collect();
        let (coverage, coverage_warnings) = collect_coverage(workdir, &ids);
        Ok(Evaluation { compile, outcomes, coverage, coverage_warnings })
    }
}

mod lossy_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}
