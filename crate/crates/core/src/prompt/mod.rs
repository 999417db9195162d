//! Two-part prompts: a scenario-specific system message and a user message
//! carrying the program plus whatever feedback the scenario allows.
//!
//! User-message sections always appear in this order, absent ones omitted:
//!
//! ```text
//! [CODE] [FAILING TESTS] [PASSING TESTS] [SUSPICIOUS LINES] [WARNINGS] [PREVIOUS ATTEMPTS]
//! ```

mod extract;
mod history;
mod template;

use serde::{Deserialize, Serialize};

pub use extract::{extract_patch, render_fenced};
pub use history::{summarize_history, AttemptSummary, DEFAULT_HISTORY_CAP, PATCH_DIGEST_LINES, REASONING_DIGEST_CHARS};
pub use template::{render, Templates, TEMPLATE_VERSION};

use crate::error::{Error, Result};
use crate::harness::{ExecutionRecord, ExitStatus, SourceUnit, TestSpec};
use crate::scenario::Scenario;
use crate::spectrum::{Formula, SuspiciousnessRanking};

pub const SECTION_CODE: &str = "[CODE]";
pub const SECTION_FAILING: &str = "[FAILING TESTS]";
pub const SECTION_PASSING: &str = "[PASSING TESTS]";
pub const SECTION_SUSPICIOUS: &str = "[SUSPICIOUS LINES]";
pub const SECTION_WARNINGS: &str = "[WARNINGS]";
pub const SECTION_HISTORY: &str = "[PREVIOUS ATTEMPTS]";

pub const SECTION_ORDER: [&str; 6] =
    [SECTION_CODE, SECTION_FAILING, SECTION_PASSING, SECTION_SUSPICIOUS, SECTION_WARNINGS, SECTION_HISTORY];

pub const EXCERPT_BYTES: usize = 2_000;
pub const MAX_USER_PROMPT_CHARS: usize = 24_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub scenario: Scenario,
    pub iteration: u32,
}

/// Feedback gathered from executing the current candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPacket {
    /// The suite, so failing tests can show their input and expected output.
    pub tests: Vec<TestSpec>,
    pub outcomes: Vec<ExecutionRecord>,
    pub ranking: Option<SuspiciousnessRanking>,
    pub warnings: Vec<String>,
    pub history: Vec<AttemptSummary>,
}

impl FeedbackPacket {
    pub fn validate(&self, scenario: Scenario, iteration: u32) -> Result<()> {
        if scenario.uses_sbfl() != self.ranking.is_some() {
            return Err(Error::InvalidInput(format!(
                "scenario {scenario} {} a suspiciousness ranking",
                if scenario.uses_sbfl() { "requires" } else { "must not carry" }
            )));
        }
        if !self.history.is_empty() && (!scenario.iterative() || iteration < 2) {
            return Err(Error::InvalidInput(format!(
                "attempt history is only allowed for iterative scenarios from iteration 2 (scenario {scenario}, iteration {iteration})"
            )));
        }
        if self.history.iter().any(|a| a.iteration >= iteration) {
            return Err(Error::InvalidInput(format!("history for iteration {iteration} references a later attempt")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBuilder {
    pub templates: Templates,
    pub formula: Formula,
    pub threshold: f64,
    pub history_cap: usize,
    pub excerpt_bytes: usize,
    pub max_user_chars: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self {
            templates: Templates::default(),
            formula: Formula::Ochiai,
            threshold: crate::spectrum::DEFAULT_THRESHOLD,
            history_cap: DEFAULT_HISTORY_CAP,
            excerpt_bytes: EXCERPT_BYTES,
            max_user_chars: MAX_USER_PROMPT_CHARS,
        }
    }
}

impl PromptBuilder {
    pub fn build_system_prompt(&self, scenario: Scenario) -> Result<String> {
        let formula = self.formula.to_string();
        let threshold = self.threshold.to_string();
        render(self.templates.system(scenario), &[("formula", &formula), ("threshold", &threshold)])
    }

    pub fn build_user_prompt(&self, code: &SourceUnit, fb: &FeedbackPacket, scenario: Scenario) -> String {
        let mut sections = vec![(SECTION_CODE, render_fenced(code.code.trim_end_matches('\n')))];
        if !scenario.uses_tests() {
            return join_sections(&sections);
        }

        let failing: Vec<&ExecutionRecord> = fb.outcomes.iter().filter(|o| !o.passed).collect();
        let failing_text = self.render_failing(&failing, &fb.tests);
        sections.push((SECTION_FAILING, failing_text.clone()));
        sections.push((SECTION_PASSING, render_passing(&fb.outcomes)));
        if scenario.uses_sbfl() {
            if let Some(ranking) = &fb.ranking {
                sections.push((SECTION_SUSPICIOUS, render_ranking(ranking, &code.code)));
            }
        }
        sections.push((SECTION_WARNINGS, render_list(&fb.warnings)));
        if scenario.iterative() && !fb.history.is_empty() {
            sections.push((SECTION_HISTORY, summarize_history(&fb.history, self.history_cap)));
        }

        let mut text = join_sections(&sections);
        if text.chars().count() <= self.max_user_chars {
            return text;
        }

        // Over budget: collapse history first, then drop it, then cut test excerpts.
        if let Some(idx) = sections.iter().position(|(h, _)| *h == SECTION_HISTORY) {
            for cap in (0..self.history_cap).rev() {
                sections[idx].1 = summarize_history(&fb.history, cap);
                text = join_sections(&sections);
                if text.chars().count() <= self.max_user_chars {
                    return text;
                }
            }
            sections[idx].1 = format!("({} earlier attempts omitted to fit the prompt budget)\n", fb.history.len());
            text = join_sections(&sections);
            if text.chars().count() <= self.max_user_chars {
                return text;
            }
        }
        let overflow = text.chars().count() - self.max_user_chars;
        let keep = failing_text.chars().count().saturating_sub(overflow + 64);
        sections[1].1 =
            format!("{}\n(remaining failing-test details omitted)\n", history::truncate_chars(&failing_text, keep));
        join_sections(&sections)
    }

    pub fn build(
        &self,
        code: &SourceUnit,
        fb: &FeedbackPacket,
        scenario: Scenario,
        iteration: u32,
    ) -> Result<PromptBundle> {
        fb.validate(scenario, iteration)?;
        Ok(PromptBundle {
            system_text: self.build_system_prompt(scenario)?,
            user_text: self.build_user_prompt(code, fb, scenario),
            scenario,
            iteration,
        })
    }

    fn render_failing(&self, failing: &[&ExecutionRecord], tests: &[TestSpec]) -> String {
        if failing.is_empty() {
            return "(none)\n".into();
        }
        let mut out = String::new();
        for (i, rec) in failing.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let status = match &rec.exit_status {
                _ if rec.timed_out => "timed out".to_string(),
                ExitStatus::NotRun => "not run (the program did not compile)".to_string(),
                ExitStatus::Exited(0) => "wrong output".to_string(),
                other => format!("wrong output, {other}"),
            };
            out.push_str(&format!("Test {}: {status}\n", rec.test_id));
            if let Some(spec) = tests.iter().find(|t| t.test_id == rec.test_id) {
                out.push_str(&self.block("Input", &spec.stdin));
                out.push_str(&self.block("Expected output", &spec.expected_stdout));
            }
            if rec.exit_status != ExitStatus::NotRun {
                out.push_str(&self.block("Actual output", &rec.actual_stdout));
            }
        }
        out
    }

    fn block(&self, title: &str, bytes: &[u8]) -> String {
        let text = excerpt(bytes, self.excerpt_bytes);
        if text.is_empty() {
            return format!("{title}: (empty)\n");
        }
        format!("{title}:\n```\n{}\n```\n", text.trim_end_matches('\n'))
    }
}

fn render_passing(outcomes: &[ExecutionRecord]) -> String {
    let ids: Vec<&str> = outcomes.iter().filter(|o| o.passed).map(|o| o.test_id.as_str()).collect();
    if ids.is_empty() {
        "(none)\n".into()
    } else {
        format!("{}\n", ids.join(", "))
    }
}

fn render_ranking(ranking: &SuspiciousnessRanking, code: &str) -> String {
    if ranking.is_empty() {
        return "(no coverage data available)\n".into();
    }
    let source: Vec<&str> = code.lines().collect();
    let mut out = format!("Ranked by {} suspiciousness (threshold {}):\n", ranking.formula, ranking.threshold);
    out.push_str(&ranking.serialize());
    out.push_str("Source of ranked lines:\n");
    for entry in &ranking.entries {
        let n = entry.line.line as usize;
        let text = source.get(n.wrapping_sub(1)).copied().unwrap_or("");
        out.push_str(&format!("{n:>5} | {}\n", text.trim_end()));
    }
    out
}

fn render_list(items: &[String]) -> String {
    if items.is_empty() {
        return "(none)\n".into();
    }
    items.iter().map(|w| format!("- {}\n", w.trim_end())).collect()
}

fn join_sections(sections: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (i, (header, body)) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(header);
        out.push('\n');
        out.push_str(body);
        if !body.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

/// Lossy text of at most `max` bytes, cut on a character boundary.
pub fn excerpt(bytes: &[u8], max: usize) -> String {
    let text = String::from_utf8_lossy(bytes);
    if text.len() <= max {
        return text.into_owned();
    }
    let mut cut = max;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}... [{} more bytes]", &text[..cut], text.len() - cut)
}
