//! Multi-agent retrieval-augmented question answering over heterogeneous data
//! stores.
//!
//! A question is routed to the query-generation agent that serves the best
//! matching data source. The agent assembles a few-shot prompt, asks a
//! completion provider for a query in its dialect, and validates the result.
//! The validated query runs in the execution environment, and the rows are
//! handed to a synthesis step that writes the final answer.
//!
//! ```text
//! question ─► router ─► agent (prompt ─► gateway ─► validator) ─► exec ─► synthesis
//! ```
//!
//! Everything runs offline against in-memory reference backends and the
//! scripted completion provider, so the whole stack is deterministic.

pub mod agents;
pub mod config;
pub mod dialect;
pub mod exec;
pub mod fault;
pub mod gateway;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod router;
pub mod schema;
pub mod tokens;

pub use agents::{extract_query_from_completion, generate_query, AgentError, GeneratedQuery, Provenance};
pub use config::{ConfigError, DeploymentConfig};
pub use dialect::{normalize_query_whitespace, ParsedQuery, ValidationError};
pub use exec::{BackendConnection, ExecError, QueryResult};
pub use gateway::{CompletionProvider, CompletionRequest, CompletionResult, Gateway, ProviderError};
pub use model::{DataSourceKind, Dialect, ResponseFormat, UserQuery, Value};
pub use pipeline::{Diagnostic, PipelineError, Response, Stage, System};
pub use prompt::{FewShotExample, Prompt, PromptError};
pub use router::{AgentDescriptor, AgentRegistry, RoutingDecision, RouterError};
pub use schema::{SchemaDescriptor, SchemaError};
pub use tokens::{estimate_tokens, ModelProfile, ProviderKind, TokenCount};

/// The message returned when no registered agent is a good enough match.
pub const NO_SUITABLE_AGENT: &str = "No suitable agent found for query generation.";
