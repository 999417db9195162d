//! Language-model access: a blocking completion interface with retries and
//! exponential backoff, an OpenAI-compatible HTTP transport, and a scripted
//! provider that replays canned responses for offline runs.

mod http;
mod retry;
mod scripted;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use http::HttpTransport;
pub use retry::{Gate, RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};
pub use scripted::{Script, ScriptedProvider};

use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

pub const ENV_ENDPOINT: &str = "REPAIRLOOP_ENDPOINT";
pub const ENV_API_KEY: &str = "REPAIRLOOP_API_KEY";
pub const ENV_MODEL: &str = "REPAIRLOOP_MODEL";

pub const DEFAULT_ENDPOINT: &str = "https://openrouter.ai/api/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "meta-llama/llama-3.1-405b-instruct";
// Not validated against any published setup.
pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_CONCURRENT: usize = 4;

/// An API key that never appears in `Debug` output or serialized logs.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_id: String,
    #[serde(skip)]
    pub api_key: Secret,
    pub retry: RetryPolicy,
    /// Seconds.
    pub request_timeout: f64,
    pub temperature: f64,
    pub max_concurrent: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            model_id: DEFAULT_MODEL.into(),
            api_key: Secret::default(),
            retry: RetryPolicy::default(),
            request_timeout: 300.0,
            temperature: DEFAULT_TEMPERATURE,
            max_concurrent: DEFAULT_MAX_CONCURRENT,
        }
    }
}

impl ProviderConfig {
    /// Defaults overridden by `REPAIRLOOP_ENDPOINT`, `REPAIRLOOP_API_KEY`
    /// and `REPAIRLOOP_MODEL`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            cfg.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            cfg.model_id = v;
        }
        if let Ok(v) = std::env::var(ENV_API_KEY) {
            cfg.api_key = Secret::new(v);
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.api_key.is_empty() {
            return Err(Error::ProviderConfig(format!("no API key; set {ENV_API_KEY}")));
        }
        if self.endpoint.is_empty() {
            return Err(Error::ProviderConfig("endpoint is empty".into()));
        }
        if self.request_timeout.is_nan() || self.request_timeout <= 0.0 {
            return Err(Error::ProviderConfig("request_timeout must be positive".into()));
        }
        self.retry.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Network failure, rate limiting or a server error.
    Retryable(String),
    Fatal(String),
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::Retryable(m) => write!(f, "{m}"),
            TransportError::Fatal(m) => write!(f, "{m} (not retried)"),
        }
    }
}

/// One round trip to a model.
pub trait Transport: Send + Sync {
    fn send(&self, prompt: &PromptBundle) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: PromptBundle,
    pub response: String,
    /// Seconds spent in the provider, backoff included.
    pub latency: f64,
    pub attempts_used: u32,
    /// Backoff waits in seconds, in order.
    pub delays: Vec<f64>,
}

/// Identifies the session a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestContext<'a> {
    pub bug_id: &'a str,
    pub session_id: &'a str,
}

/// A completion source shared by any number of sessions.
pub trait Provider: Send + Sync {
    /// Model label used to group benchmark rows.
    fn label(&self) -> &str;

    fn complete(&self, ctx: RequestContext<'_>, prompt: &PromptBundle) -> Result<ChatExchange>;
}

/// Wraps a [`Transport`] with retry, backoff and a concurrency ceiling.
pub struct RetryingProvider<T> {
    transport: T,
    retry: RetryPolicy,
    sleeper: Box<dyn Sleeper>,
    gate: Gate,
    label: String,
}

impl<T: Transport> RetryingProvider<T> {
    pub fn new(transport: T, retry: RetryPolicy, label: impl Into<String>) -> Self {
        Self {
            transport,
            retry,
            sleeper: Box::new(ThreadSleeper),
            gate: Gate::new(DEFAULT_MAX_CONCURRENT),
            label: label.into(),
        }
    }

    pub fn with_sleeper(mut self, sleeper: impl Sleeper + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn with_max_concurrent(mut self, permits: usize) -> Self {
        self.gate = Gate::new(permits);
        self
    }
}

impl<T: Transport> Provider for RetryingProvider<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn complete(&self, _ctx: RequestContext<'_>, prompt: &PromptBundle) -> Result<ChatExchange> {
        let started = Instant::now();
        let mut delays = Vec::new();
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            let outcome = {
                let _permit = self.gate.acquire();
                self.transport.send(prompt)
            };
            match outcome {
                Ok(response) => {
                    return Ok(ChatExchange {
                        request: prompt.clone(),
                        response,
                        latency: started.elapsed().as_secs_f64(),
                        attempts_used: attempt,
                        delays,
                    })
                }
                Err(TransportError::Fatal(msg)) => {
                    return Err(Error::ProviderUnavailable { attempts: attempt, last_error: msg });
                }
                Err(TransportError::Retryable(msg)) => {
                    log::warn!("provider attempt {attempt}/{} failed: {msg}", self.retry.max_attempts);
                    last_error = msg;
                    if attempt < self.retry.max_attempts {
                        let delay = self.retry.delay(attempt);
                        delays.push(delay.as_secs_f64());
                        self.sleeper.sleep(delay);
                    }
                }
            }
        }
        Err(Error::ProviderUnavailable { attempts: self.retry.max_attempts, last_error })
    }
}

pub type HttpProvider = RetryingProvider<HttpTransport>;

impl HttpProvider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(RetryingProvider::new(HttpTransport::new(cfg)?, cfg.retry, cfg.model_id.clone())
            .with_max_concurrent(cfg.max_concurrent))
    }
}

/// One-shot completion against the configured HTTP endpoint.
pub fn complete(cfg: &ProviderConfig, prompt: &PromptBundle) -> Result<ChatExchange> {
    HttpProvider::from_config(cfg)?.complete(RequestContext { bug_id: "", session_id: "" }, prompt)
}
