use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde_json::json;
use tempfile::TempDir;

use super::runlog::RunLog;
use super::workflow::{Stage, StageTiming};
use super::{classify_outcome, select_best_attempt, RepairAttempt, SessionConfig, SessionReport, Termination};
use crate::bench::BugCase;
use crate::error::{Error, Result};
use crate::harness::{Evaluation, ExitStatus, Harness, SandboxLimits, Severity, SourceUnit};
use crate::prompt::{excerpt, extract_patch, AttemptSummary, FeedbackPacket, PromptBuilder, Templates};
use crate::provider::{Provider, RequestContext};
use crate::spectrum::{localize, SuspiciousnessRanking};

const MAX_WARNINGS: usize = 40;
const STDERR_EXCERPT: usize = 500;

static SESSION_SEQ: AtomicU64 = AtomicU64::new(0);

/// Mutable state of one bug's repair loop.
pub struct SessionState {
    pub bug: BugCase,
    pub session_id: String,
    /// The program the next prompt shows: the original, then the latest patch.
    pub current: SourceUnit,
    pub evaluation: Evaluation,
    pub initial_failing: BTreeSet<String>,
    pub attempts: Vec<RepairAttempt>,
    pub history: Vec<AttemptSummary>,
    /// Notes carried into the next prompt's warnings, e.g. an unusable response.
    pub pending_warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
    started: Instant,
    workdir: TempDir,
}

impl SessionState {
    pub fn workdir(&self) -> &Path {
        self.workdir.path()
    }

    /// Failing tests after the latest attempt, or of the original program.
    pub fn latest_failing(&self) -> &BTreeSet<String> {
        self.attempts.last().map_or(&self.initial_failing, |a| &a.failing_after)
    }

    fn timed<T>(&mut self, stage: Stage, iteration: u32, f: impl FnOnce(&mut Self) -> T) -> T {
        let started = Instant::now();
        let out = f(self);
        self.timings.push(StageTiming { stage, iteration, seconds: started.elapsed().as_secs_f64() });
        out
    }
}

/// Drives sessions for one configuration and provider.
pub struct Session<'a> {
    cfg: &'a SessionConfig,
    provider: &'a dyn Provider,
    harness: Harness,
    prompts: PromptBuilder,
    log: Option<RunLog>,
}

impl<'a> Session<'a> {
    pub fn new(cfg: &'a SessionConfig, provider: &'a dyn Provider) -> Result<Self> {
        cfg.validate()?;
        let harness = Harness {
            timeout: Duration::from_secs_f64(cfg.test_timeout),
            limits: SandboxLimits { memory_bytes: cfg.memory_limit, ..SandboxLimits::default() },
            ..Harness::default()
        };
        let templates = match &cfg.templates_dir {
            Some(dir) => Templates::load_dir(dir, format!("custom:{}", dir.display()))?,
            None => Templates::default(),
        };
        let prompts = PromptBuilder {
            templates,
            formula: cfg.formula,
            threshold: cfg.threshold,
            history_cap: cfg.history_cap,
            ..PromptBuilder::default()
        };
        Ok(Self { cfg, provider, harness, prompts, log: None })
    }

    pub fn with_harness(mut self, harness: Harness) -> Self {
        self.harness = harness;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptBuilder) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(RunLog::path)
    }

    fn record(&mut self, kind: &str, data: &impl serde::Serialize) {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.append(kind, data) {
                warn!("run log write failed: {e}");
            }
        }
    }

    /// Creates the scratch directory and run log, then executes the
    /// original program to establish the initially failing tests.
    pub fn start(&mut self, bug: &BugCase) -> Result<SessionState> {
        bug.validate()?;
        let started = Instant::now();
        let scenario = self.cfg.scenario.number();
        if let Some(dir) = &self.cfg.runs_dir {
            self.log = Some(RunLog::create(dir, &bug.bug_id, scenario)?);
            let toolchain = self.harness.toolchain.versions().unwrap_or_default();
            let header = json!({
                "bug_id": bug.bug_id,
                "scenario": scenario,
                "model": self.provider.label(),
                "config": self.cfg,
                "template_version": self.prompts.templates.version,
                "compiler": toolchain.0,
                "gcov": toolchain.1,
            });
            self.record("session", &header);
        }

        let root = self.cfg.work_root.clone().unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let workdir = tempfile::Builder::new()
            .prefix(&format!("repairloop-s{scenario}-"))
            .tempdir_in(&root)
            .map_err(|e| Error::io(&root, e))?;

        let original = SourceUnit::new(bug.buggy_source.clone(), "original")?;
        let baseline_dir = workdir.path().join("baseline");
        let exec_started = Instant::now();
        let mut evaluation = self.harness.evaluate(&original, &bug.tests, &baseline_dir)?;
        relativize(&mut evaluation, workdir.path());
        let timing = StageTiming { stage: Stage::Execute, iteration: 0, seconds: exec_started.elapsed().as_secs_f64() };
        self.record("baseline", &evaluation);

        let initial_failing: BTreeSet<String> = evaluation.failing().into_iter().collect();
        let seq = SESSION_SEQ.fetch_add(1, Ordering::Relaxed);
        Ok(SessionState {
            bug: bug.clone(),
            session_id: format!("{}#s{scenario}#{seq}", bug.bug_id),
            current: original,
            evaluation,
            initial_failing,
            attempts: Vec::new(),
            history: Vec::new(),
            pending_warnings: Vec::new(),
            timings: vec![timing],
            started,
            workdir,
        })
    }

    /// One pass around the cycle: feedback, prompt, complete, extract and
    /// execute. Appends exactly one attempt unless the provider fails, in
    /// which case the error is returned and the state is left unchanged.
    pub fn step(&mut self, state: &mut SessionState) -> Result<()> {
        let iteration = state.attempts.len() as u32 + 1;
        let scenario = self.cfg.scenario;

        let feedback = state.timed(Stage::Feedback, iteration, |s| self.feedback(s, iteration))?;
        let prompt = state
            .timed(Stage::Prompt, iteration, |s| self.prompts.build(&s.current, &feedback, scenario, iteration))?;
        self.record("prompt", &prompt);

        let ctx = RequestContext { bug_id: &state.bug.bug_id, session_id: &state.session_id };
        let provider = self.provider;
        let started = Instant::now();
        let exchange = provider.complete(ctx, &prompt);
        state.timings.push(StageTiming { stage: Stage::Complete, iteration, seconds: started.elapsed().as_secs_f64() });
        let exchange = match exchange {
            Ok(x) => x,
            Err(e) => {
                self.record("error", &json!({"iteration": iteration, "stage": "complete", "message": e.to_string()}));
                return Err(e);
            }
        };
        self.record(
            "response",
            &json!({
                "iteration": iteration,
                "response": exchange.response,
                "latency": exchange.latency,
                "attempts_used": exchange.attempts_used,
                "delays": exchange.delays,
            }),
        );

        let extracted = state
            .timed(Stage::Extract, iteration, |_| extract_patch(&exchange.response, &format!("attempt-{iteration}")));
        let attempt = match extracted {
            Ok((patch, reasoning)) => {
                let dir = state.workdir().join(format!("attempt-{iteration}"));
                let tests = state.bug.tests.clone();
                let harness = &self.harness;
                let mut evaluation =
                    state.timed(Stage::Execute, iteration, |_| harness.evaluate(&patch, &tests, &dir))?;
                relativize(&mut evaluation, state.workdir());
                self.record("execution", &json!({"iteration": iteration, "evaluation": evaluation}));

                let failing_after: BTreeSet<String> = evaluation.failing().into_iter().collect();
                let mut summary =
                    AttemptSummary::new(iteration, &reasoning, &patch.code, failing_after.iter().cloned().collect());
                if !evaluation.compile.success {
                    summary = summary.with_note("the patch did not compile");
                }
                state.history.push(summary);
                let attempt = RepairAttempt {
                    iteration,
                    prompt,
                    exchange,
                    patch: Some(patch.clone()),
                    reasoning,
                    compile: Some(evaluation.compile.clone()),
                    outcomes: evaluation.outcomes.clone(),
                    failing_after,
                    error: None,
                };
                state.current = patch;
                state.evaluation = evaluation;
                attempt
            }
            Err(e) => {
                let message = e.to_string();
                state
                    .pending_warnings
                    .push(format!("iteration {iteration}: {message}; the program above is unchanged"));
                let failing_after = state.latest_failing().clone();
                state.history.push(
                    AttemptSummary::new(iteration, &exchange.response, "", failing_after.iter().cloned().collect())
                        .with_note(format!("no program extracted ({message})")),
                );
                RepairAttempt {
                    iteration,
                    prompt,
                    exchange,
                    patch: None,
                    reasoning: String::new(),
                    compile: None,
                    outcomes: Vec::new(),
                    failing_after,
                    error: Some(message),
                }
            }
        };
        info!("{} iteration {iteration}: {} failing", state.bug.bug_id, attempt.failing_after.len());
        self.record(
            "attempt",
            &json!({
                "iteration": iteration,
                "failing_after": attempt.failing_after,
                "error": attempt.error,
            }),
        );
        state.attempts.push(attempt);
        Ok(())
    }

    fn feedback(&self, state: &mut SessionState, iteration: u32) -> Result<FeedbackPacket> {
        let scenario = self.cfg.scenario;
        if !scenario.uses_tests() {
            return Ok(FeedbackPacket::default());
        }
        let eval = &state.evaluation;
        let ranking = if scenario.uses_sbfl() { Some(self.rank(eval)?) } else { None };

        let mut warnings = Vec::new();
        if !eval.compile.success {
            warnings.push("the program did not compile, so every test counts as failing".to_string());
        }
        warnings.extend(
            eval.compile
                .diagnostics
                .iter()
                .filter(|d| d.severity != Severity::Note)
                .map(|d| format!("compiler: {}", d.text)),
        );
        warnings.extend(runtime_warnings(eval, self.cfg.test_timeout));
        warnings.extend(eval.coverage_warnings.iter().map(|w| format!("coverage: {w}")));
        warnings.append(&mut state.pending_warnings);
        if warnings.len() > MAX_WARNINGS {
            let extra = warnings.len() - MAX_WARNINGS;
            warnings.truncate(MAX_WARNINGS);
            warnings.push(format!("... {extra} more warnings omitted"));
        }

        let history = if scenario.iterative() && iteration >= 2 { state.history.clone() } else { Vec::new() };
        Ok(FeedbackPacket {
            tests: state.bug.tests.clone(),
            outcomes: eval.outcomes.clone(),
            ranking,
            warnings,
            history,
        })
    }

    fn rank(&self, eval: &Evaluation) -> Result<SuspiciousnessRanking> {
        if !eval.compile.success {
            return Ok(SuspiciousnessRanking {
                formula: self.cfg.formula,
                threshold: self.cfg.threshold,
                entries: vec![],
            });
        }
        localize(&eval.coverage, &eval.verdicts(), self.cfg.formula, self.cfg.threshold, self.cfg.fallback_k)
    }

    /// Builds the report; `error` annotates an aborted session.
    pub fn finish(&mut self, state: SessionState, termination: Termination, error: Option<String>) -> SessionReport {
        let all_tests: BTreeSet<String> = state.bug.tests.iter().map(|t| t.test_id.clone()).collect();
        let best = select_best_attempt(&state.attempts);
        let final_failing = best.map_or_else(|| state.initial_failing.clone(), |a| a.failing_after.clone());
        let verdict = match best {
            Some(_) => classify_outcome(&state.initial_failing, &final_failing, &all_tests),
            None if state.initial_failing.is_empty() => super::Verdict::CompleteFix,
            None => super::Verdict::NoImprovement,
        };
        let regressions = final_failing.difference(&state.initial_failing).cloned().collect();
        let report = SessionReport {
            bug_id: state.bug.bug_id.clone(),
            scenario: self.cfg.scenario,
            model: self.provider.label().to_string(),
            verdict,
            termination,
            iterations_used: state.attempts.len() as u32,
            best_iteration: best.map(|a| a.iteration),
            initial_failing: state.initial_failing.clone(),
            final_failing,
            regressions,
            wall_time: state.started.elapsed().as_secs_f64(),
            provider_latency: state.attempts.iter().map(|a| a.exchange.latency).sum(),
            error,
            attempts: state.attempts,
            timings: state.timings,
        };
        self.record("report", &report);
        report
    }

    /// Runs the whole loop for `bug`.
    pub fn run(&mut self, bug: &BugCase) -> Result<SessionReport> {
        let mut state = self.start(bug)?;
        if state.initial_failing.is_empty() {
            let note = "the original program already passes every test".to_string();
            return Ok(self.finish(state, Termination::NothingToRepair, Some(note)));
        }
        let budget = self.cfg.call_budget();
        while (state.attempts.len() as u32) < budget && !state.latest_failing().is_empty() {
            match self.step(&mut state) {
                Ok(()) => {}
                Err(e @ Error::ProviderUnavailable { .. }) => {
                    warn!("{}: {e}", bug.bug_id);
                    return Ok(self.finish(state, Termination::ProviderUnavailable, Some(e.to_string())));
                }
                Err(e) => return Err(e),
            }
        }
        let termination =
            if state.latest_failing().is_empty() { Termination::AllTestsPass } else { Termination::LoopLimitReached };
        Ok(self.finish(state, termination, None))
    }
}

fn runtime_warnings(eval: &Evaluation, timeout: f64) -> Vec<String> {
    let mut out = Vec::new();
    for o in &eval.outcomes {
        if o.timed_out {
            out.push(format!("test {}: timed out after {timeout} s", o.test_id));
        } else {
            match &o.exit_status {
                ExitStatus::Signaled(sig) => out.push(format!("test {}: terminated by {sig}", o.test_id)),
                ExitStatus::Exited(code) if *code != 0 => {
                    out.push(format!("test {}: exited with status {code}", o.test_id))
                }
                _ => {}
            }
        }
        if !o.stderr.is_empty() {
            let text = excerpt(&o.stderr, STDERR_EXCERPT);
            out.push(format!("test {} stderr: {}", o.test_id, text.trim_end()));
        }
    }
    out
}

/// Stores the binary path relative to the session directory, which is
/// deleted when the session ends.
fn relativize(eval: &mut Evaluation, workdir: &Path) {
    if let Some(path) = eval.compile.binary_path.as_mut() {
        if let Ok(rel) = path.strip_prefix(workdir) {
            *path = PathBuf::from(rel);
        }
    }
}

/// Runs one repair session. Provider exhaustion yields a `NoImprovement`
/// report with an error annotation; only environment problems (missing
/// compiler, unwritable directories) are returned as errors.
pub fn run_session(bug: &BugCase, cfg: &SessionConfig, provider: &dyn Provider) -> Result<SessionReport> {
    Session::new(cfg, provider)?.run(bug)
}

/// One cycle of the loop without run logging; see [`Session::step`].
pub fn step(state: &mut SessionState, cfg: &SessionConfig, provider: &dyn Provider) -> Result<()> {
    Session::new(cfg, provider)?.step(state)
}
