//! OpenAI-compatible chat-completions client.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{CompletionProvider, CompletionRequest, ProviderError};
use crate::tokens::ProviderKind;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Model name sent in the request body.
    pub model: String,
    /// Environment variable holding the bearer token, if the endpoint needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

#[derive(Debug)]
pub struct HttpProvider {
    config: HttpProviderConfig,
    token: Option<String>,
    agent: ureq::Agent,
    permits: Permits,
}

impl HttpProvider {
    /// Reads the bearer token from the environment now, so a missing
    /// variable surfaces at startup rather than on the first question.
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let token = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ProviderError::Unavailable(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Permits::new(config.max_in_flight);
        Ok(Self {
            config,
            token,
            agent,
            permits,
        })
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }
}

impl CompletionProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": request.prompt().body() }],
            "temperature": request.temperature(),
            "max_tokens": request.max_output_tokens(),
        });
        let _permit = self.permits.acquire();
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProviderError::Unavailable(format!("endpoint returned HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(ProviderError::Refusal(format!("endpoint returned HTTP {status}")));
        }
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Refusal(format!("unreadable response body: {e}")))?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| ProviderError::Refusal("response has no choices[0].message.content".into()))?;
        Ok(text.trim().to_string())
    }
}
