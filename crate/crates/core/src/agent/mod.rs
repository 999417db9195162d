//! The repair loop: execute, gather feedback, prompt, complete, extract,
//! re-test. Single-shot scenarios make one call; iterative ones loop until
//! every test passes or the iteration budget is spent.

mod runlog;
mod session;
mod workflow;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use runlog::{find_logs, read_log, report_from_log, LogRecord, RunLog};
pub use session::{run_session, step, Session, SessionState};
pub use workflow::{Node, Stage, StageTiming};

use crate::error::{Error, Result};
use crate::harness::{CompileResult, ExecutionRecord, SourceUnit, DEFAULT_MEMORY_LIMIT};
use crate::prompt::{PromptBundle, DEFAULT_HISTORY_CAP};
use crate::provider::ChatExchange;
use crate::scenario::Scenario;
use crate::spectrum::{Formula, DEFAULT_FALLBACK_K, DEFAULT_THRESHOLD};

pub const DEFAULT_MAX_ITERATIONS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub scenario: Scenario,
    pub max_iterations: u32,
    pub formula: Formula,
    pub threshold: f64,
    pub fallback_k: usize,
    /// Per-test limit in seconds.
    pub test_timeout: f64,
    pub history_cap: usize,
    pub memory_limit: u64,
    /// Where JSONL run logs go; `None` disables logging.
    pub runs_dir: Option<PathBuf>,
    /// Parent of per-session scratch directories; the system temp dir when `None`.
    pub work_root: Option<PathBuf>,
    /// Directory of `scenario<N>.txt` system prompts replacing the built-in ones.
    pub templates_dir: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::CotSbfl,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            formula: Formula::Ochiai,
            threshold: DEFAULT_THRESHOLD,
            fallback_k: DEFAULT_FALLBACK_K,
            test_timeout: 120.0,
            history_cap: DEFAULT_HISTORY_CAP,
            memory_limit: DEFAULT_MEMORY_LIMIT,
            runs_dir: None,
            work_root: None,
            templates_dir: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidInput(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if !self.test_timeout.is_finite() || self.test_timeout <= 0.0 {
            return Err(Error::InvalidInput("test timeout must be positive".into()));
        }
        if self.history_cap < 1 {
            return Err(Error::InvalidInput("history cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Provider calls a session may make.
    pub fn call_budget(&self) -> u32 {
        if self.scenario.iterative() {
            self.max_iterations
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    CompleteFix,
    PartialImprovement,
    NoImprovement,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::CompleteFix => "CompleteFix",
            Verdict::PartialImprovement => "PartialImprovement",
            Verdict::NoImprovement => "NoImprovement",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Verdict::CompleteFix, Verdict::PartialImprovement, Verdict::NoImprovement]
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown verdict `{s}`")))
    }
}

/// Why a session stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllTestsPass,
    /// The call budget was spent with tests still failing.
    LoopLimitReached,
    ProviderUnavailable,
    /// The original program already passed every test.
    NothingToRepair,
    /// The session could not run, e.g. the compiler is missing.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairAttempt {
    pub iteration: u32,
    pub prompt: PromptBundle,
    pub exchange: ChatExchange,
    /// `None` when the response held no usable program.
    pub patch: Option<SourceUnit>,
    pub reasoning: String,
    pub compile: Option<CompileResult>,
    pub outcomes: Vec<ExecutionRecord>,
    pub failing_after: BTreeSet<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub bug_id: String,
    pub scenario: Scenario,
    pub model: String,
    pub verdict: Verdict,
    pub termination: Termination,
    pub iterations_used: u32,
    pub best_iteration: Option<u32>,
    pub initial_failing: BTreeSet<String>,
    pub final_failing: BTreeSet<String>,
    pub regressions: BTreeSet<String>,
    /// Seconds from session start to verdict: compilation, localization,
    /// provider calls and validation.
    pub wall_time: f64,
    /// Seconds spent waiting on the provider, summed over calls.
    pub provider_latency: f64,
    pub error: Option<String>,
    pub attempts: Vec<RepairAttempt>,
    pub timings: Vec<StageTiming>,
}

/// Verdict for the best attempt, judged against the initially failing tests.
///
/// `CompleteFix` when nothing fails. `PartialImprovement` when at least one
/// initially failing test now passes. Tests that newly fail (regressions)
/// never count as progress.
pub fn classify_outcome(
    initial_failing: &BTreeSet<String>,
    best_final_failing: &BTreeSet<String>,
    all_tests: &BTreeSet<String>,
) -> Verdict {
    debug_assert!(initial_failing.is_subset(all_tests));
    if best_final_failing.is_empty() {
        return Verdict::CompleteFix;
    }
    let still_failing = initial_failing.intersection(best_final_failing).count();
    if still_failing < initial_failing.len() {
        Verdict::PartialImprovement
    } else {
        Verdict::NoImprovement
    }
}

/// The attempt with the fewest failing tests, earliest on ties.
pub fn select_best_attempt(attempts: &[RepairAttempt]) -> Option<&RepairAttempt> {
    attempts.iter().min_by_key(|a| (a.failing_after.len(), a.iteration))
}
