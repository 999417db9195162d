use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ProviderConfig, Transport, TransportError};
use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

/// OpenAI-compatible `chat/completions` client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.request_timeout))
            .build()
            .map_err(|e| Error::ProviderConfig(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model_id.clone(),
            api_key: cfg.api_key.expose().to_string(),
            temperature: cfg.temperature,
        })
    }

    pub fn request_body(model: &str, temperature: f64, prompt: &PromptBundle) -> serde_json::Value {
        json!({
            "model": model,
            "temperature": temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, prompt: &PromptBundle) -> Result<String, TransportError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&Self::request_body(&self.model, self.temperature, prompt))
            .send()
            .map_err(|e| TransportError::Retryable(format!("request failed: {e}")))?;

        let status = response.status();
        let body = response.text().map_err(|e| TransportError::Retryable(format!("reading body: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Retryable(format!("HTTP {status}: {}", snippet(&body))));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}: {}", snippet(&body))));
        }
        parse_content(&body)
    }
}

/// Pulls `choices[0].message.content` out of a response body. Bodies with
/// no content (some gateways report overload inside a 200) are retryable.
pub(super) fn parse_content(body: &str) -> Result<String, TransportError> {
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| TransportError::Retryable(format!("malformed response ({e}): {}", snippet(body))))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .filter(|c| !c.trim().is_empty())
        .ok_or_else(|| TransportError::Retryable(format!("response has no content: {}", snippet(body))))
}

fn snippet(body: &str) -> String {
    crate::prompt::excerpt(body.as_bytes(), 300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn body_has_system_then_user() {
        let p =
            PromptBundle { system_text: "S".into(), user_text: "U".into(), scenario: Scenario::CotSbfl, iteration: 1 };
        let body = HttpTransport::request_body("m", 0.2, &p);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], "S");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["messages"][1]["content"], "U");
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn parses_content() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_content(ok).unwrap(), "hi");
        assert!(matches!(parse_content(r#"{"choices":[]}"#), Err(TransportError::Retryable(_))));
        assert!(matches!(parse_content("<html>"), Err(TransportError::Retryable(_))));
    }
}
