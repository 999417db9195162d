use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::Deserialize;

use super::{ChatExchange, Provider, RequestContext};
use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

/// Canned responses: one list for every bug, or one list per bug id with
/// an optional `"*"` entry for bugs not listed.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Script {
    Shared(Vec<String>),
    PerBug(BTreeMap<String, Vec<String>>),
}

impl Script {
    /// Reads a JSON script: `["r1", "r2"]` or `{"bug": ["r1"], "*": ["r"]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: Script =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        script.validate()?;
        Ok(script)
    }

    fn validate(&self) -> Result<()> {
        let empty = match self {
            Script::Shared(list) => list.is_empty(),
            Script::PerBug(map) => map.is_empty() || map.values().any(Vec::is_empty),
        };
        if empty {
            return Err(Error::InvalidInput("scripted provider needs at least one response".into()));
        }
        Ok(())
    }

    fn responses(&self, bug_id: &str) -> Option<&[String]> {
        match self {
            Script::Shared(list) => Some(list),
            Script::PerBug(map) => map.get(bug_id).or_else(|| map.get("*")).map(Vec::as_slice),
        }
    }
}

/// Replays responses in order, one per call and per session. After the
/// script runs out the final response repeats.
pub struct ScriptedProvider {
    script: Script,
    cursors: Mutex<HashMap<String, usize>>,
    label: String,
}

impl ScriptedProvider {
    pub fn new(responses: Vec<String>) -> Result<Self> {
        Self::from_script(Script::Shared(responses))
    }

    pub fn from_script(script: Script) -> Result<Self> {
        script.validate()?;
        Ok(Self { script, cursors: Mutex::new(HashMap::new()), label: "scripted".into() })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl Provider for ScriptedProvider {
    fn label(&self) -> &str {
        &self.label
    }

    fn complete(&self, ctx: RequestContext<'_>, prompt: &PromptBundle) -> Result<ChatExchange> {
        let started = Instant::now();
        let responses = self.script.responses(ctx.bug_id).ok_or_else(|| Error::ProviderUnavailable {
            attempts: 1,
            last_error: format!("no script for bug `{}`", ctx.bug_id),
        })?;
        let idx = {
            let mut cursors = self.cursors.lock().unwrap();
            let cursor = cursors.entry(ctx.session_id.to_string()).or_insert(0);
            let idx = (*cursor).min(responses.len() - 1);
            *cursor += 1;
            idx
        };
        Ok(ChatExchange {
            request: prompt.clone(),
            response: responses[idx].clone(),
            latency: started.elapsed().as_secs_f64(),
            attempts_used: 1,
            delays: Vec::new(),
        })
    }
}
