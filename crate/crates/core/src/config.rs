//! Deployment files: which model, which sources, which agents.
//!
//! Relative paths inside a deployment file are resolved against the file's
//! own directory, so a deployment can be moved as a unit.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::exec::{connect, BackendConnection, ExecError, ExternalBackend, SourceConfig};
use crate::gateway::{
    CompletionProvider, Gateway, HttpProvider, HttpProviderConfig, ProviderError, ScriptedProvider, ScriptedRuleError,
    DEFAULT_MAX_OUTPUT_TOKENS,
};
use crate::model::{DataSourceKind, Dialect, UserQuery};
use crate::pipeline::{FallbackPolicy, System, Telemetry};
use crate::prompt::{compare_prompt_tokens, ExampleSet, PromptError, TokenComparison, DEFAULT_COMPLETION_RESERVE};
use crate::router::{AgentDescriptor, AgentRegistry, Router, RouterError, RoutingWeights, DEFAULT_THRESHOLD};
use crate::schema::{SchemaDescriptor, SchemaError};
use crate::tokens::{ModelProfile, ProfileError, ProviderKind, DEFAULT_CHARS_PER_TOKEN};

/// Environment variable naming the deployment file when none is given.
pub const CONFIG_ENV: &str = "POLYRAG_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {reason}", path.display())]
    Read { path: PathBuf, reason: String },
    #[error("cannot parse {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error("{what} {} does not exist", path.display())]
    MissingFile { what: String, path: PathBuf },
    #[error("invalid deployment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Rules(#[from] ScriptedRuleError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Built-in profile name, or a custom name when `context_window` is set.
    pub profile: String,
    #[serde(default)]
    pub context_window: Option<u64>,
    #[serde(default)]
    pub chars_per_token: Option<f64>,
    pub provider: ProviderKind,
    /// Rule table for the scripted provider.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<HttpProviderConfig>,
    #[serde(default = "default_reserve")]
    pub completion_reserve: u64,
    #[serde(default = "default_max_output")]
    pub max_output_tokens: u32,
}

fn default_reserve() -> u64 {
    DEFAULT_COMPLETION_RESERVE
}

fn default_max_output() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_retries() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub weights: RoutingWeights,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            weights: RoutingWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackConfig {
    #[serde(default)]
    pub reroute: bool,
    #[serde(default)]
    pub search_source: Option<String>,
    #[serde(default = "default_retries")]
    pub execute_retries: u32,
}

impl Default for FallbackConfig {
    fn default() -> Self {
        Self {
            reroute: false,
            search_source: None,
            execute_retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: String,
    pub kind: DataSourceKind,
    pub source: String,
    pub schema: PathBuf,
    pub examples: PathBuf,
    /// Extra routing words for this agent.
    #[serde(default)]
    pub lexicon: Vec<String>,
}

/// One entry of a labeled routing corpus.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledQuestion {
    pub question: String,
    pub source: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    queries: Vec<LabeledQuestion>,
}

/// A parsed deployment with every path made absolute.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub telemetry: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub fallback: FallbackConfig,
    pub sources: Vec<SourceConfig>,
    pub agents: Vec<AgentConfig>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require_file(what: impl Into<String>, path: &Path) -> Result<(), ConfigError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError::MissingFile {
            what: what.into(),
            path: path.to_path_buf(),
        })
    }
}

impl DeploymentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    /// Parses and checks a deployment whose relative paths hang off `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: DeploymentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<deployment>"),
            reason: e.to_string(),
        })?;
        for p in [&mut cfg.corpus, &mut cfg.telemetry, &mut cfg.model.rules].into_iter().flatten() {
            resolve(base, p);
        }
        for s in &mut cfg.sources {
            if let Some(seed) = &mut s.seed {
                resolve(base, seed);
            }
        }
        for a in &mut cfg.agents {
            resolve(base, &mut a.schema);
            resolve(base, &mut a.examples);
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let mut ids = BTreeSet::new();
        for s in &self.sources {
            if !ids.insert(s.id.as_str()) {
                return Err(ConfigError::Invalid(format!("source `{}` is declared twice", s.id)));
            }
            match (&s.seed, &s.external) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid(format!("source `{}` has both a seed and an external endpoint", s.id)))
                }
                (Some(seed), None) => require_file(format!("seed file of `{}`", s.id), seed)?,
                _ => {}
            }
        }
        let mut agent_ids = BTreeSet::new();
        for a in &self.agents {
            if !agent_ids.insert(a.id.as_str()) {
                return Err(ConfigError::Invalid(format!("agent `{}` is declared twice", a.id)));
            }
            let source = self.source(&a.source).ok_or_else(|| {
                ConfigError::Invalid(format!("agent `{}` references undeclared source `{}`", a.id, a.source))
            })?;
            if source.kind != a.kind {
                return Err(ConfigError::Invalid(format!(
                    "agent `{}` is {} but source `{}` is {}",
                    a.id, a.kind, a.source, source.kind
                )));
            }
            require_file(format!("schema of `{}`", a.id), &a.schema)?;
            require_file(format!("examples of `{}`", a.id), &a.examples)?;
        }
        if self.agents.is_empty() {
            return Err(ConfigError::Invalid("no agents are declared".into()));
        }
        let t = self.routing.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Invalid(format!("routing threshold {t} is outside [0, 1]")));
        }
        let w = &self.routing.weights;
        if [w.schema, w.lexicon, w.examples].iter().any(|x| !x.is_finite() || *x < 0.0) || w.total() <= 0.0 {
            return Err(ConfigError::Invalid("routing weights must be non-negative with a positive sum".into()));
        }
        if let Some(corpus) = &self.corpus {
            require_file("routing corpus", corpus)?;
        }
        match self.model.provider {
            ProviderKind::Scripted => {
                let rules = self
                    .model
                    .rules
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("the scripted provider needs `model.rules`".into()))?;
                require_file("rule table", rules)?;
            }
            ProviderKind::Http => {
                if self.model.http.is_none() {
                    return Err(ConfigError::Invalid("the http provider needs a `model.http` section".into()));
                }
            }
        }
        if let Some(search) = &self.fallback.search_source {
            let s = self
                .source(search)
                .ok_or_else(|| ConfigError::Invalid(format!("fallback search source `{search}` is not declared")))?;
            if s.kind != DataSourceKind::Search {
                return Err(ConfigError::Invalid(format!("fallback source `{search}` is not a search source")));
            }
        }
        if self.fallback.reroute && self.fallback.search_source.is_none() {
            return Err(ConfigError::Invalid("fallback.reroute needs fallback.search_source".into()));
        }
        Ok(())
    }

    pub fn source(&self, id: &str) -> Option<&SourceConfig> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn profile(&self) -> Result<ModelProfile, ConfigError> {
        let m = &self.model;
        let profile = match m.context_window {
            Some(window) => ModelProfile::new(
                &m.profile,
                m.provider,
                window,
                m.chars_per_token.unwrap_or(DEFAULT_CHARS_PER_TOKEN),
            )?,
            None => {
                let builtin = ModelProfile::builtin(&m.profile)?.with_provider(m.provider);
                match m.chars_per_token {
                    Some(ratio) => ModelProfile::new(builtin.name(), m.provider, builtin.context_window(), ratio)?,
                    None => builtin,
                }
            }
        };
        Ok(profile)
    }

    /// Schemas of every agent, keyed by source.
    pub fn schemas(&self) -> Result<Vec<SchemaDescriptor>, ConfigError> {
        self.agents.iter().map(|a| Ok(SchemaDescriptor::load(&a.schema)?)).collect()
    }

    pub fn build_router(&self) -> Result<Router, ConfigError> {
        let mut registry = AgentRegistry::new();
        for a in &self.agents {
            let schema = SchemaDescriptor::load(&a.schema)?;
            let dialect: Dialect = a.kind.dialect();
            let examples = ExampleSet::load(&a.examples, dialect)?;
            let descriptor =
                AgentDescriptor::new(&a.id, a.kind, &a.source, examples.id()).with_lexicon(a.lexicon.iter().cloned());
            registry.register_agent(descriptor, schema, examples)?;
        }
        Ok(registry.freeze(self.routing.weights.clone(), self.routing.threshold))
    }

    pub fn build_provider(&self) -> Result<Arc<dyn CompletionProvider>, ConfigError> {
        Ok(match self.model.provider {
            ProviderKind::Scripted => {
                let rules = self.model.rules.as_ref().expect("checked at load");
                Arc::new(ScriptedProvider::load(rules)?)
            }
            ProviderKind::Http => Arc::new(HttpProvider::new(self.model.http.clone().expect("checked at load"))?),
        })
    }

    pub fn build_gateway(&self, provider: Arc<dyn CompletionProvider>) -> Result<Gateway, ConfigError> {
        Ok(Gateway::new(provider, self.profile()?)
            .with_reserve(self.model.completion_reserve)
            .with_max_output_tokens(self.model.max_output_tokens))
    }

    /// Connects every declared source. An unreachable external source is
    /// kept as a failed connection so the rest of the deployment still runs.
    pub fn connect_all(&self, router: &Router) -> Result<Vec<BackendConnection>, ConfigError> {
        let mut out = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            let schema = router.agent_for_source(&s.id).map(|a| &a.schema);
            match connect(&s.id, &self.sources, schema) {
                Ok(c) => out.push(c),
                Err(ExecError::ConnectionFailed { source_id, cause }) => {
                    let ext = s.external.clone().expect("only external sources are probed");
                    out.push(BackendConnection::failed(
                        source_id,
                        Arc::new(ExternalBackend::new(s.kind, ext)),
                        cause,
                    ));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }

    pub fn fallback_policy(&self) -> FallbackPolicy {
        FallbackPolicy {
            execute_retries: self.fallback.execute_retries,
            reroute: self.fallback.reroute,
            search_source: self.fallback.search_source.clone(),
        }
    }

    pub fn build_system(&self) -> Result<System, ConfigError> {
        self.build_system_with(self.build_provider()?)
    }

    /// Builds the deployment around a caller-supplied provider.
    pub fn build_system_with(&self, provider: Arc<dyn CompletionProvider>) -> Result<System, ConfigError> {
        let router = self.build_router()?;
        let gateway = self.build_gateway(provider)?;
        let connections = self.connect_all(&router)?;
        let telemetry = match &self.telemetry {
            Some(p) => Telemetry::to_file(p),
            None => Telemetry::discard(),
        };
        Ok(System::new(router, gateway, connections)
            .with_policy(self.fallback_policy())
            .with_telemetry(telemetry))
    }

    pub fn load_corpus(&self) -> Result<Vec<LabeledQuestion>, ConfigError> {
        let path = self
            .corpus
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("no routing corpus is configured".into()))?;
        load_corpus(path)
    }
}

impl DeploymentConfig {
    /// Specialized versus monolithic prompt sizes over the labeled corpus.
    /// Each question is prompted for the agent serving its labeled source.
    pub fn token_benchmark(&self) -> Result<Vec<TokenComparison>, ConfigError> {
        let router = self.build_router()?;
        let profile = self.profile()?;
        self.load_corpus()?
            .iter()
            .map(|item| {
                let agent = router.agent_for_source(&item.source).ok_or_else(|| {
                    ConfigError::Invalid(format!("corpus names source `{}`, which no agent serves", item.source))
                })?;
                let query = UserQuery::new(item.question.as_str())
                    .map_err(|e| ConfigError::Invalid(format!("corpus question: {e}")))?;
                Ok(compare_prompt_tokens(&router, agent, &query, &profile)?)
            })
            .collect()
    }
}

pub fn load_corpus(path: &Path) -> Result<Vec<LabeledQuestion>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let file: CorpusFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(file.queries)
}
