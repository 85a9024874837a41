//! Chat-completions endpoint over blocking HTTP.
//!
//! Sends each prompt as a single user message in the OpenAI-compatible
//! request shape and returns the first choice's message content.

use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use obqc::repair::{EndpointError, RewriterEndpoint};
use serde::Deserialize;
use serde_json::{json, Value};

fn default_timeout_ms() -> u64 {
    60_000
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Minimum spacing between requests, for rate-limited services.
    #[serde(default)]
    pub min_interval_ms: u64,
}

impl EndpointConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading endpoint config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub struct HttpEndpoint {
    config: EndpointConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .with_context(|| format!("environment variable {var} not set"))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpEndpoint {
            config,
            api_key,
            agent,
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

/// Pull `choices[0].message.content` out of a completion response.
pub fn completion_text(body: &Value) -> Result<String, EndpointError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| EndpointError::InvalidResponse("no choices[0].message.content".into()))
}

impl RewriterEndpoint for HttpEndpoint {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError> {
        let mut request = self.agent.post(&self.config.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(self.request_body(prompt))
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(EndpointError::Status { status, body });
        }
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| EndpointError::InvalidResponse(e.to_string()))?;
        completion_text(&body)
    }

    fn describe(&self) -> String {
        format!("{} at {}", self.config.model, self.config.url)
    }
}
