//! Completion providers behind one interface.

mod http;
mod scripted;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::prompt::{enforce_context_window, Prompt, PromptError, DEFAULT_COMPLETION_RESERVE};
use crate::tokens::{estimate_tokens, ModelProfile, ProviderKind, TokenCount};

pub use http::{HttpProvider, HttpProviderConfig, DEFAULT_MAX_IN_FLIGHT};
pub use scripted::{normalize_question, render_answer, RuleSpec, ScriptedProvider, ScriptedRuleError};

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("completion provider unavailable: {0}")]
    Unavailable(String),
    #[error("completion provider refused: {0}")]
    Refusal(String),
}

/// A prompt that has passed the context-window check, with decoding
/// parameters. The only constructor performs the check.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    prompt: Prompt,
    profile: ModelProfile,
    temperature: f64,
    max_output_tokens: u32,
}

impl CompletionRequest {
    pub fn new(prompt: Prompt, profile: &ModelProfile, reserve: u64) -> Result<Self, PromptError> {
        enforce_context_window(&prompt, profile, reserve)?;
        Ok(Self {
            prompt,
            profile: profile.clone(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        })
    }

    /// Negative or non-finite temperatures are clamped to 0.
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = if temperature.is_finite() { temperature.max(0.0) } else { 0.0 };
        self
    }

    /// Zero is raised to 1.
    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n.max(1);
        self
    }

    pub fn prompt(&self) -> &Prompt {
        &self.prompt
    }

    pub fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_output_tokens(&self) -> u32 {
        self.max_output_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionResult {
    pub text: String,
    pub output_token_estimate: TokenCount,
    pub provider_latency_ms: u64,
    pub provider: ProviderKind,
}

pub trait CompletionProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Returns the raw completion text.
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

/// Binds a provider to a model profile and budget settings.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    profile: ModelProfile,
    reserve: u64,
    max_output_tokens: u32,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.kind())
            .field("profile", &self.profile)
            .field("reserve", &self.reserve)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, profile: ModelProfile) -> Self {
        Self {
            provider,
            profile,
            reserve: DEFAULT_COMPLETION_RESERVE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn with_reserve(mut self, reserve: u64) -> Self {
        self.reserve = reserve;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n.max(1);
        self
    }

    /// The same settings over a different provider.
    pub fn with_provider(mut self, provider: Arc<dyn CompletionProvider>) -> Self {
        self.provider = provider;
        self
    }

    pub fn provider(&self) -> &Arc<dyn CompletionProvider> {
        &self.provider
    }

    pub fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    pub fn reserve(&self) -> u64 {
        self.reserve
    }

    pub fn provider_kind(&self) -> ProviderKind {
        self.provider.kind()
    }

    pub fn request(&self, prompt: Prompt) -> Result<CompletionRequest, PromptError> {
        Ok(CompletionRequest::new(prompt, &self.profile, self.reserve)?.with_max_output_tokens(self.max_output_tokens))
    }

    /// Sends a checked request. Leading and trailing whitespace is removed
    /// and an empty completion counts as a refusal.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let started = Instant::now();
        let raw = self.provider.complete(request)?;
        let text = raw.trim().to_string();
        if text.is_empty() {
            return Err(ProviderError::Refusal("empty completion".into()));
        }
        Ok(CompletionResult {
            output_token_estimate: estimate_tokens(&text, request.profile()),
            text,
            provider_latency_ms: started.elapsed().as_millis() as u64,
            provider: self.provider.kind(),
        })
    }
}
