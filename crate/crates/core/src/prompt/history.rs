use serde::{Deserialize, Serialize};

use super::extract::render_fenced;

pub const DEFAULT_HISTORY_CAP: usize = 3;
pub const REASONING_DIGEST_CHARS: usize = 500;
pub const PATCH_DIGEST_LINES: usize = 40;

/// Compact memory of one earlier attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub iteration: u32,
    pub reasoning_digest: String,
    pub patch_digest: String,
    pub failing_after: Vec<String>,
    /// Why the attempt produced no usable result, e.g. a compile failure.
    pub note: Option<String>,
}

impl AttemptSummary {
    pub fn new(iteration: u32, reasoning: &str, patch: &str, failing_after: Vec<String>) -> Self {
        Self {
            iteration,
            reasoning_digest: truncate_chars(reasoning.trim(), REASONING_DIGEST_CHARS),
            patch_digest: truncate_lines(patch, PATCH_DIGEST_LINES),
            failing_after,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn render_collapsed(&self) -> String {
        let k = self.failing_after.len();
        let noun = if k == 1 { "test" } else { "tests" };
        format!("iteration {}: {k} {noun} still failing", self.iteration)
    }

    fn render_full(&self) -> String {
        let mut out = format!("--- iteration {} ---\n", self.iteration);
        if let Some(note) = &self.note {
            out.push_str(&format!("Outcome: {note}\n"));
        }
        let reasoning = if self.reasoning_digest.is_empty() { "(none given)" } else { &self.reasoning_digest };
        out.push_str(&format!("Reasoning: {reasoning}\n"));
        out.push_str("Patch:\n");
        out.push_str(&render_fenced(&self.patch_digest));
        out.push('\n');
        let failing = if self.failing_after.is_empty() { "none".to_string() } else { self.failing_after.join(", ") };
        out.push_str(&format!("Still failing: {failing}\n"));
        out
    }
}

/// Renders attempts oldest first: everything older than the newest `cap`
/// attempts is collapsed to a single line, the rest are shown in full.
/// `cap` of zero collapses every attempt.
pub fn summarize_history(attempts: &[AttemptSummary], cap: usize) -> String {
    let split = attempts.len().saturating_sub(cap);
    let (older, recent) = attempts.split_at(split);
    let mut out = String::new();
    for a in older {
        out.push_str(&a.render_collapsed());
        out.push('\n');
    }
    for a in recent {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&a.render_full());
    }
    out
}

pub(crate) fn truncate_chars(text: &str, max: usize) -> String {
    match text.char_indices().nth(max) {
        None => text.to_string(),
        Some((cut, _)) => format!("{}...", &text[..cut]),
    }
}

fn truncate_lines(text: &str, max: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() <= max {
        return text.trim_end_matches('\n').to_string();
    }
    let mut out = lines[..max].join("\n");
    out.push_str(&format!("\n/* ... {} more lines omitted ... */", lines.len() - max));
    out
}
