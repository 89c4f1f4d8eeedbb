//! Deterministic token estimation and model profiles.
//!
//! Token counts are estimated with a character ratio rather than a vendor
//! tokenizer: `ceil(chars / chars_per_token)`, counting Unicode scalar values.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CHARS_PER_TOKEN: f64 = 4.0;

/// An estimated number of tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub const ZERO: TokenCount = TokenCount(0);

    pub fn value(self) -> u64 {
        self.0
    }
}

impl Add for TokenCount {
    type Output = TokenCount;

    fn add(self, rhs: TokenCount) -> TokenCount {
        TokenCount(self.0 + rhs.0)
    }
}

impl std::iter::Sum for TokenCount {
    fn sum<I: Iterator<Item = TokenCount>>(iter: I) -> Self {
        iter.fold(TokenCount::ZERO, Add::add)
    }
}

impl fmt::Display for TokenCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Http,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Scripted => "scripted",
            ProviderKind::Http => "http",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile `{0}`: context window must be positive")]
    ZeroWindow(String),
    #[error("profile `{0}`: chars_per_token must be a positive finite number, got {1}")]
    BadRatio(String, f64),
    #[error("unknown model profile `{0}`")]
    Unknown(String),
}

/// Completion-provider identity and context budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelProfile {
    name: String,
    provider: ProviderKind,
    context_window: u64,
    chars_per_token: f64,
}

impl ModelProfile {
    pub fn new(
        name: impl Into<String>,
        provider: ProviderKind,
        context_window: u64,
        chars_per_token: f64,
    ) -> Result<Self, ProfileError> {
        let name = name.into();
        if context_window == 0 {
            return Err(ProfileError::ZeroWindow(name));
        }
        if !(chars_per_token.is_finite() && chars_per_token > 0.0) {
            return Err(ProfileError::BadRatio(name, chars_per_token));
        }
        Ok(Self {
            name,
            provider,
            context_window,
            chars_per_token,
        })
    }

    /// Looks up one of the built-in profiles by name (case-insensitive).
    pub fn builtin(name: &str) -> Result<Self, ProfileError> {
        BUILTIN_MODELS
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .map(BuiltinModel::profile)
            .ok_or_else(|| ProfileError::Unknown(name.to_string()))
    }

    pub fn builtins() -> Vec<ModelProfile> {
        BUILTIN_MODELS.iter().map(BuiltinModel::profile).collect()
    }

    pub fn with_provider(mut self, provider: ProviderKind) -> Self {
        self.provider = provider;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provider(&self) -> ProviderKind {
        self.provider
    }

    pub fn context_window(&self) -> u64 {
        self.context_window
    }

    pub fn chars_per_token(&self) -> f64 {
        self.chars_per_token
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hosting {
    Local,
    Api,
}

/// One row of the reference model catalogue.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinModel {
    pub name: &'static str,
    pub vendor: &'static str,
    pub hosting: Hosting,
    pub context_window: u64,
}

impl BuiltinModel {
    fn profile(&self) -> ModelProfile {
        ModelProfile {
            name: self.name.to_string(),
            provider: ProviderKind::Http,
            context_window: self.context_window,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

// Mistral 7B is listed with a 4096-token window that a sliding-window scheme
// stretches to 16K; the hard per-request window is what gets enforced.
pub const BUILTIN_MODELS: &[BuiltinModel] = &[
    BuiltinModel { name: "mistral-7b", vendor: "Mistral", hosting: Hosting::Local, context_window: 4_096 },
    BuiltinModel { name: "zephyr", vendor: "Huggingface", hosting: Hosting::Local, context_window: 8_192 },
    BuiltinModel { name: "phi-2", vendor: "Microsoft", hosting: Hosting::Local, context_window: 2_048 },
    BuiltinModel { name: "llama-3", vendor: "Meta", hosting: Hosting::Local, context_window: 8_192 },
    BuiltinModel { name: "gpt-4", vendor: "OpenAI", hosting: Hosting::Api, context_window: 128_000 },
    BuiltinModel { name: "gpt-4-turbo", vendor: "OpenAI", hosting: Hosting::Api, context_window: 128_000 },
    BuiltinModel { name: "gpt-3.5-turbo", vendor: "OpenAI", hosting: Hosting::Api, context_window: 16_385 },
    BuiltinModel { name: "gemini-1.5-flash", vendor: "Google", hosting: Hosting::Api, context_window: 1_048_576 },
    BuiltinModel { name: "gemini-1.5-pro", vendor: "Google", hosting: Hosting::Api, context_window: 2_097_152 },
];

/// Estimates the token count of `text` under `profile`.
pub fn estimate_tokens(text: &str, profile: &ModelProfile) -> TokenCount {
    estimate_with_ratio(text, profile.chars_per_token)
}

pub(crate) fn estimate_with_ratio(text: &str, chars_per_token: f64) -> TokenCount {
    let chars = text.chars().count();
    if chars == 0 {
        return TokenCount::ZERO;
    }
    TokenCount((chars as f64 / chars_per_token).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four() -> ModelProfile {
        ModelProfile::new("t", ProviderKind::Scripted, 100, 4.0).unwrap()
    }

    #[test]
    fn ceiling_of_char_ratio() {
        let p = four();
        assert_eq!(estimate_tokens("", &p), TokenCount(0));
        // ceil(8 / 4) and ceil(9 / 4)
        assert_eq!(estimate_tokens("abcdefgh", &p), TokenCount(2));
        assert_eq!(estimate_tokens("abcdefghi", &p), TokenCount(3));
        // characters, not bytes
        assert_eq!(estimate_tokens("éééé", &p), TokenCount(1));
    }

    #[test]
    fn builtin_windows() {
        let window = |n: &str| ModelProfile::builtin(n).unwrap().context_window();
        assert_eq!(window("GPT-4"), 128_000);
        assert_eq!(window("gpt-3.5-turbo"), 16_385);
        assert_eq!(window("gemini-1.5-pro"), 2_097_152);
        assert_eq!(window("gemini-1.5-flash"), 1_048_576);
        assert_eq!(window("phi-2"), 2_048);
        assert!(ModelProfile::builtin("gpt-5").is_err());
    }

    #[test]
    fn invalid_profiles() {
        assert!(matches!(
            ModelProfile::new("x", ProviderKind::Http, 0, 4.0),
            Err(ProfileError::ZeroWindow(_))
        ));
        assert!(ModelProfile::new("x", ProviderKind::Http, 1, 0.0).is_err());
        assert!(ModelProfile::new("x", ProviderKind::Http, 1, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn concatenation_never_shrinks(a in ".{0,64}", b in ".{0,64}", ratio in 0.5f64..8.0) {
            let p = ModelProfile::new("t", ProviderKind::Scripted, 10, ratio).unwrap();
            let joined = estimate_tokens(&format!("{a}{b}"), &p);
            prop_assert!(joined >= estimate_tokens(&a, &p));
            prop_assert!(joined >= estimate_tokens(&b, &p));
        }
    }
}
