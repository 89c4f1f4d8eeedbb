//! End-to-end question answering: route, generate, execute, synthesize.
//!
//! Failures walk a fixed ladder before giving up. The agent re-prompts once
//! with the validator's diagnostic, a failed execution is retried once, and
//! when enabled the question is rerouted to the search source as a keyword
//! query. If all of that fails the caller still gets a [`Response`], flagged
//! as degraded and carrying the diagnostics collected on the way. The only
//! error is a question no agent is willing to take.

mod synthesis;
mod telemetry;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{generate_query_traced, GeneratedQuery, Provenance};
use crate::dialect::{MatchClause, SearchDslQuery};
use crate::exec::{search_tokens, BackendConnection, QueryResult};
use crate::gateway::Gateway;
use crate::model::{ResponseFormat, UserQuery};
use crate::router::{is_stopword, RegisteredAgent, Router, RouterError};
use crate::schema::FieldType;
use crate::tokens::TokenCount;

pub use synthesis::{render_locally, synthesize_answer, Synthesis, SynthesisError};
pub use telemetry::{Telemetry, TelemetryError, TelemetryEvent};

use telemetry::SessionLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Route,
    Prompt,
    Complete,
    Validate,
    Execute,
    Synthesize,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Route => "route",
            Stage::Prompt => "prompt",
            Stage::Complete => "complete",
            Stage::Validate => "validate",
            Stage::Execute => "execute",
            Stage::Synthesize => "synthesize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Retried,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub stage: Stage,
    pub note: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.note)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response {
    text: String,
    format: ResponseFormat,
    source_id: String,
    generated_query_text: String,
    degraded: bool,
    diagnostics: Vec<Diagnostic>,
    session_id: String,
    result: Option<QueryResult>,
    unanswered: Option<Stage>,
    tokens_in: TokenCount,
    event_count: usize,
}

impl Response {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn format(&self) -> ResponseFormat {
        self.format
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn generated_query_text(&self) -> &str {
        &self.generated_query_text
    }

    pub fn degraded(&self) -> bool {
        self.degraded
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Rows the answer was written from, if any query ran.
    pub fn result(&self) -> Option<&QueryResult> {
        self.result.as_ref()
    }

    /// The stage whose failure left the question without an answer.
    pub fn unanswered(&self) -> Option<Stage> {
        self.unanswered
    }

    /// Prompt tokens sent to the provider across all stages.
    pub fn tokens_in(&self) -> TokenCount {
        self.tokens_in
    }

    /// Number of telemetry events the session produced.
    pub fn event_count(&self) -> usize {
        self.event_count
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PipelineError {
    #[error("{}", crate::NO_SUITABLE_AGENT)]
    NoSuitableAgent { best: Option<(String, f64)> },
}

/// Bounds of the fallback ladder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FallbackPolicy {
    /// Extra execution attempts after a retryable failure.
    pub execute_retries: u32,
    /// Whether to try the search source before degrading.
    pub reroute: bool,
    pub search_source: Option<String>,
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        Self {
            execute_retries: 1,
            reroute: false,
            search_source: None,
        }
    }
}

/// A ready deployment: frozen router, gateway, and one connection per source.
pub struct System {
    pub(crate) router: Router,
    pub(crate) gateway: Gateway,
    pub(crate) connections: Vec<BackendConnection>,
    pub(crate) policy: FallbackPolicy,
    pub(crate) telemetry: Telemetry,
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("System")
            .field("agents", &self.router.agents().len())
            .field("gateway", &self.gateway)
            .field("connections", &self.connections)
            .field("policy", &self.policy)
            .finish()
    }
}

impl System {
    pub fn new(router: Router, gateway: Gateway, connections: Vec<BackendConnection>) -> Self {
        Self {
            router,
            gateway,
            connections,
            policy: FallbackPolicy::default(),
            telemetry: Telemetry::discard(),
        }
    }

    pub fn with_policy(mut self, policy: FallbackPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_telemetry(mut self, telemetry: Telemetry) -> Self {
        self.telemetry = telemetry;
        self
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn policy(&self) -> &FallbackPolicy {
        &self.policy
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    pub fn connections(&self) -> &[BackendConnection] {
        &self.connections
    }

    pub fn connection(&self, source_id: &str) -> Option<&BackendConnection> {
        self.connections.iter().find(|c| c.source_id() == source_id)
    }

    pub fn answer(&self, query: &UserQuery) -> Result<Response, PipelineError> {
        Session::new(self, query).run()
    }

    /// Writes an answer over an existing result, without routing.
    pub fn synthesize(&self, query: &UserQuery, result: &QueryResult) -> Result<Response, SynthesisError> {
        let s = synthesize_answer(&self.gateway, query, result).map_err(|(e, _)| e)?;
        Ok(Response {
            text: s.text,
            format: query.requested_format(),
            source_id: result.source_id().to_string(),
            generated_query_text: String::new(),
            degraded: false,
            diagnostics: Vec::new(),
            session_id: query.session_id().to_string(),
            result: Some(result.clone()),
            unanswered: None,
            tokens_in: s.tokens_in,
            event_count: 0,
        })
    }

    fn reroute_target(&self, failed_source: &str) -> Option<(&RegisteredAgent, &BackendConnection)> {
        if !self.policy.reroute {
            return None;
        }
        let search = self.policy.search_source.as_deref()?;
        if search == failed_source {
            return None;
        }
        Some((self.router.agent_for_source(search)?, self.connection(search)?))
    }
}

/// Keyword query over the search agent's index: the question's content
/// words matched against the first free-text field.
pub fn keyword_query(agent: &RegisteredAgent, question: &str) -> Option<String> {
    let entity = agent.schema.entities().first()?;
    let field = entity
        .fields
        .iter()
        .find(|f| f.ty == FieldType::String && !f.name.to_ascii_lowercase().ends_with("id"))?;
    let mut words: Vec<String> = Vec::new();
    for w in search_tokens(question) {
        if !is_stopword(&w) && !words.contains(&w) {
            words.push(w);
        }
    }
    if words.is_empty() {
        return None;
    }
    let q = SearchDslQuery {
        index: None,
        must: vec![MatchClause {
            field: field.name.clone(),
            text: words.join(" "),
        }],
    };
    Some(q.render())
}

struct Session<'a> {
    system: &'a System,
    query: &'a UserQuery,
    log: SessionLog<'a>,
    diagnostics: Vec<Diagnostic>,
    tokens_in: TokenCount,
    generated_query_text: String,
}

impl<'a> Session<'a> {
    fn new(system: &'a System, query: &'a UserQuery) -> Self {
        Self {
            system,
            query,
            log: SessionLog::new(&system.telemetry, query.session_id()),
            diagnostics: Vec::new(),
            tokens_in: TokenCount::ZERO,
            generated_query_text: String::new(),
        }
    }

    fn emit(&mut self, stage: Stage, started: Instant, tokens: (TokenCount, TokenCount), outcome: Outcome) {
        self.emit_ms(stage, started.elapsed().as_millis() as u64, tokens, outcome);
    }

    fn emit_ms(&mut self, stage: Stage, duration_ms: u64, (tin, tout): (TokenCount, TokenCount), outcome: Outcome) {
        self.tokens_in = TokenCount(self.tokens_in.value() + tin.value());
        self.log.emit(stage, duration_ms, tin, tout, outcome);
    }

    fn note(&mut self, stage: Stage, note: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            stage,
            note: note.into(),
        });
    }

    fn run(mut self) -> Result<Response, PipelineError> {
        let system = self.system;
        let started = Instant::now();
        let decision = match system.router.identify_data_source(self.query) {
            Ok(d) => d,
            Err(e) => {
                self.emit(Stage::Route, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Failed);
                let best = match e {
                    RouterError::NoSuitableAgent { best } => best,
                    _ => None,
                };
                return Err(PipelineError::NoSuitableAgent { best });
            }
        };
        self.emit(Stage::Route, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Ok);
        let source = decision.source_id().to_string();
        let agent = system
            .router
            .agent(decision.agent_id())
            .expect("routing returns a registered agent");

        let generation = generate_query_traced(agent, self.query, &system.gateway);
        let mut failed_stage = Stage::Validate;
        for step in generation.steps {
            self.emit_ms(step.stage, step.duration_ms, (step.tokens_in, step.tokens_out), step.outcome);
            if step.outcome != Outcome::Ok {
                failed_stage = step.stage;
                if let Some(note) = step.note {
                    self.note(step.stage, note);
                }
            }
        }
        let generated = match generation.outcome {
            Ok(g) => g,
            Err(e) => {
                if self.diagnostics.is_empty() {
                    self.note(failed_stage, e.to_string());
                }
                return Ok(self.fall_back(&source, failed_stage));
            }
        };
        self.generated_query_text = generated.text().to_string();

        match self.execute(&source, &generated, 1 + system.policy.execute_retries) {
            Some(result) => Ok(self.finish(&source, result, false)),
            None => Ok(self.fall_back(&source, Stage::Execute)),
        }
    }

    fn execute(&mut self, source: &str, generated: &GeneratedQuery, attempts: u32) -> Option<QueryResult> {
        let Some(conn) = self.system.connection(source) else {
            self.emit(Stage::Execute, Instant::now(), (TokenCount::ZERO, TokenCount::ZERO), Outcome::Failed);
            self.note(Stage::Execute, format!("no connection to `{source}`"));
            return None;
        };
        for attempt in 1..=attempts.max(1) {
            let started = Instant::now();
            match conn.execute(generated) {
                Ok(result) => {
                    self.emit(Stage::Execute, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Ok);
                    return Some(result);
                }
                Err(e) => {
                    let retry = e.is_retryable() && attempt < attempts;
                    let outcome = if retry { Outcome::Retried } else { Outcome::Failed };
                    self.emit(Stage::Execute, started, (TokenCount::ZERO, TokenCount::ZERO), outcome);
                    self.note(Stage::Execute, e.to_string());
                    if !retry {
                        return None;
                    }
                }
            }
        }
        None
    }

    fn finish(mut self, source: &str, result: QueryResult, mut degraded: bool) -> Response {
        let started = Instant::now();
        let text = match synthesize_answer(&self.system.gateway, self.query, &result) {
            Ok(s) => {
                self.emit_ms(Stage::Synthesize, s.duration_ms, (s.tokens_in, s.tokens_out), Outcome::Ok);
                s.text
            }
            Err((e, tokens_in)) => {
                self.emit(Stage::Synthesize, started, (tokens_in, TokenCount::ZERO), Outcome::Failed);
                self.note(Stage::Synthesize, format!("{e}; answer rendered without the model"));
                degraded = true;
                render_locally(self.query.text(), self.query.requested_format(), &result)
            }
        };
        self.respond(text, source, Some(result), degraded, None)
    }

    fn fall_back(mut self, source: &str, failed: Stage) -> Response {
        if let Some((agent, _)) = self.system.reroute_target(source) {
            let search_source = agent.descriptor.source_id().to_string();
            let started = Instant::now();
            self.emit(Stage::Route, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Ok);
            self.note(Stage::Route, format!("rerouted to search source `{search_source}` with a keyword query"));
            let started = Instant::now();
            let checked = keyword_query(agent, self.query.text())
                .ok_or_else(|| "the question has no keywords".to_string())
                .and_then(|text| {
                    GeneratedQuery::validate(&agent.schema, &text, Provenance::FirstAttempt).map_err(|e| e.to_string())
                });
            match checked {
                Ok(generated) => {
                    self.emit(Stage::Validate, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Ok);
                    if let Some(result) = self.execute(&search_source, &generated, 1) {
                        self.generated_query_text = generated.text().to_string();
                        return self.finish(&search_source, result, true);
                    }
                }
                Err(note) => {
                    self.emit(Stage::Validate, started, (TokenCount::ZERO, TokenCount::ZERO), Outcome::Failed);
                    self.note(Stage::Validate, format!("keyword query: {note}"));
                }
            }
        }
        let last = self.diagnostics.last().map(|d| d.note.clone()).unwrap_or_default();
        let text = format!("The question could not be answered: the {failed} stage failed ({last}).");
        self.respond(text, source, None, true, Some(failed))
    }

    fn respond(
        mut self,
        text: String,
        source: &str,
        result: Option<QueryResult>,
        degraded: bool,
        unanswered: Option<Stage>,
    ) -> Response {
        if let Some(e) = self.log.sink_error.take() {
            self.note(Stage::Synthesize, e.to_string());
        }
        debug_assert!(!degraded || !self.diagnostics.is_empty());
        Response {
            text,
            format: self.query.requested_format(),
            source_id: source.to_string(),
            generated_query_text: self.generated_query_text,
            degraded,
            diagnostics: self.diagnostics,
            session_id: self.query.session_id().to_string(),
            result,
            unanswered,
            tokens_in: self.tokens_in,
            event_count: self.log.count,
        }
    }
}
