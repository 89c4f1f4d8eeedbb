//! Query execution against registered data sources.
//!
//! Four in-memory backends give the reference semantics for each dialect.
//! An external adapter forwards rendered queries to a query service over
//! HTTP for deployments that front real stores.
//!
//! Shared rules:
//! * results follow insertion order, after any `ORDER BY`; search results
//!   are ranked by descending score with insertion order breaking ties
//! * a comparison against a missing or null value is false
//! * ints and floats compare numerically, strings and dates byte-wise
//! * comparing a number with a string (or any other mixed pair) fails the
//!   query instead of coercing

mod compare;
mod document;
mod external;
mod graph;
mod relational;
mod search;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::GeneratedQuery;
use crate::dialect::ParsedQuery;
use crate::model::{DataSourceKind, Value};
use crate::schema::SchemaDescriptor;

pub use compare::{compare_values, order_values, type_compatible};
pub use document::DocumentBackend;
pub use external::{ExternalBackend, ExternalConfig};
pub use graph::GraphBackend;
pub use relational::RelationalBackend;
pub use search::{search_tokens, SearchBackend};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("unknown data source `{0}`")]
    UnknownSource(String),
    #[error("cannot connect to `{source_id}`: {cause}")]
    ConnectionFailed { source_id: String, cause: String },
    #[error("`{source_id}` holds {kind} data but the query is {dialect}")]
    DialectMismatch {
        source_id: String,
        kind: DataSourceKind,
        dialect: crate::model::Dialect,
    },
    #[error("query targets `{query_source}` but was sent to `{connection_source}`")]
    SourceMismatch {
        query_source: String,
        connection_source: String,
    },
    #[error("connection to `{0}` is not ready")]
    NotReady(String),
    #[error("execution failed: {0}")]
    ExecutionFailed(String),
    #[error("malformed dataset: record {index}, field `{field}`: {reason}")]
    MalformedDataset { index: usize, field: String, reason: String },
    #[error("cannot read dataset {path}: {reason}")]
    DatasetUnreadable { path: String, reason: String },
    #[error("`{0}` does not accept seed data")]
    NotSeedable(String),
}

impl ExecError {
    pub(crate) fn failed(msg: impl Into<String>) -> Self {
        Self::ExecutionFailed(msg.into())
    }

    pub(crate) fn malformed(index: usize, field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::MalformedDataset {
            index,
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Faults worth one more try: the backend failed or is not ready.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::ExecutionFailed(_) | Self::NotReady(_))
    }
}

/// Column names and value tuples, before timing and attribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    row_count: usize,
    elapsed_ms: u64,
    source_id: String,
}

impl QueryResult {
    /// Fails if any row's width differs from the column count.
    pub fn new(rows: Rows, source_id: impl Into<String>, elapsed_ms: u64) -> Result<Self, ExecError> {
        let width = rows.columns.len();
        if let Some(i) = rows.rows.iter().position(|r| r.len() != width) {
            return Err(ExecError::failed(format!(
                "row {i} has {} values for {width} columns",
                rows.rows[i].len()
            )));
        }
        Ok(Self {
            row_count: rows.rows.len(),
            columns: rows.columns,
            rows: rows.rows,
            elapsed_ms,
            source_id: source_id.into(),
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.elapsed_ms
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Values of one column, if present.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Adapter contract shared by every backend.
pub trait Backend: Send + Sync {
    fn kind(&self) -> DataSourceKind;

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError>;

    /// Replaces the contents with `dataset`, returning the record count.
    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError>;

    /// Hash of the current contents.
    fn state_digest(&self) -> String;
}

pub(crate) fn digest_of(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("backend state serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Ready,
    Failed,
}

/// Declaration of one data source in a deployment.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub id: String,
    pub kind: DataSourceKind,
    /// Seed dataset for an in-memory source.
    #[serde(default)]
    pub seed: Option<PathBuf>,
    /// Remote query service; when present the source is external.
    #[serde(default)]
    pub external: Option<ExternalConfig>,
}

#[derive(Clone)]
pub struct BackendConnection {
    source_id: String,
    kind: DataSourceKind,
    adapter: Arc<dyn Backend>,
    health: Health,
    failure: Option<String>,
}

impl std::fmt::Debug for BackendConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendConnection")
            .field("source_id", &self.source_id)
            .field("kind", &self.kind)
            .field("health", &self.health)
            .finish()
    }
}

/// An empty in-memory backend for `kind`. Relational tables declared in
/// `schema` are created empty and typed.
pub fn in_memory_backend(kind: DataSourceKind, schema: Option<&SchemaDescriptor>) -> Arc<dyn Backend> {
    match kind {
        DataSourceKind::Relational => Arc::new(RelationalBackend::new(schema)),
        DataSourceKind::Document => Arc::new(DocumentBackend::new()),
        DataSourceKind::Graph => Arc::new(GraphBackend::new()),
        DataSourceKind::Search => Arc::new(SearchBackend::new()),
    }
}

/// Connects to `source_id` as declared in `sources`. In-memory sources are
/// seeded from their dataset, external ones are probed.
pub fn connect(
    source_id: &str,
    sources: &[SourceConfig],
    schema: Option<&SchemaDescriptor>,
) -> Result<BackendConnection, ExecError> {
    let cfg = sources
        .iter()
        .find(|s| s.id == source_id)
        .ok_or_else(|| ExecError::UnknownSource(source_id.to_string()))?;
    if let Some(ext) = &cfg.external {
        let backend = ExternalBackend::new(cfg.kind, ext.clone());
        backend.probe().map_err(|cause| ExecError::ConnectionFailed {
            source_id: source_id.to_string(),
            cause,
        })?;
        return Ok(BackendConnection::new(source_id, Arc::new(backend)));
    }
    let conn = BackendConnection::new(source_id, in_memory_backend(cfg.kind, schema));
    if let Some(seed) = &cfg.seed {
        conn.load_seed_data(seed)?;
    }
    Ok(conn)
}

impl BackendConnection {
    pub fn new(source_id: impl Into<String>, adapter: Arc<dyn Backend>) -> Self {
        Self {
            source_id: source_id.into(),
            kind: adapter.kind(),
            adapter,
            health: Health::Ready,
            failure: None,
        }
    }

    /// A connection that refuses to execute, carrying why.
    pub fn failed(source_id: impl Into<String>, adapter: Arc<dyn Backend>, cause: impl Into<String>) -> Self {
        Self {
            health: Health::Failed,
            failure: Some(cause.into()),
            ..Self::new(source_id, adapter)
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn kind(&self) -> DataSourceKind {
        self.kind
    }

    pub fn health(&self) -> Health {
        self.health
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn adapter(&self) -> &Arc<dyn Backend> {
        &self.adapter
    }

    /// The same connection over a different adapter of the same kind.
    pub fn with_adapter(mut self, adapter: Arc<dyn Backend>) -> Self {
        assert_eq!(adapter.kind(), self.kind, "adapter kind must not change");
        self.adapter = adapter;
        self
    }

    pub fn state_digest(&self) -> String {
        self.adapter.state_digest()
    }

    pub fn execute(&self, query: &GeneratedQuery) -> Result<QueryResult, ExecError> {
        if query.source_id() != self.source_id {
            return Err(ExecError::SourceMismatch {
                query_source: query.source_id().to_string(),
                connection_source: self.source_id.clone(),
            });
        }
        self.execute_parsed(query.parsed())
    }

    /// Runs an already-validated AST, skipping the source check.
    pub fn execute_parsed(&self, query: &ParsedQuery) -> Result<QueryResult, ExecError> {
        if self.health != Health::Ready {
            return Err(ExecError::NotReady(self.source_id.clone()));
        }
        if query.dialect().kind() != self.kind {
            return Err(ExecError::DialectMismatch {
                source_id: self.source_id.clone(),
                kind: self.kind,
                dialect: query.dialect(),
            });
        }
        let started = Instant::now();
        let rows = self.adapter.execute(query)?;
        QueryResult::new(rows, self.source_id.clone(), started.elapsed().as_millis() as u64)
    }

    pub fn load_seed_data(&self, path: impl AsRef<Path>) -> Result<usize, ExecError> {
        let path = path.as_ref();
        let unreadable = |reason: String| ExecError::DatasetUnreadable {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))?;
        self.adapter.load(&value)
    }

    pub fn load_seed_value(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        self.adapter.load(dataset)
    }
}

/// Reads a top-level array member of a dataset object.
pub(crate) fn dataset_array<'a>(
    dataset: &'a serde_json::Value,
    key: &str,
) -> Result<&'a Vec<serde_json::Value>, ExecError> {
    dataset
        .get(key)
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| ExecError::malformed(0, key, format!("dataset must be an object with a `{key}` array")))
}

pub(crate) fn name_of(entry: &serde_json::Value, index: usize) -> Result<String, ExecError> {
    entry
        .get("name")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ExecError::malformed(index, "name", "missing or not a string"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_rows_must_match_columns() {
        let bad = Rows {
            columns: vec!["a".into()],
            rows: vec![vec![Value::Int(1), Value::Int(2)]],
        };
        assert!(QueryResult::new(bad, "s", 0).is_err());
        let good = Rows {
            columns: vec!["a".into()],
            rows: vec![vec![Value::Int(1)]],
        };
        let r = QueryResult::new(good, "s", 0).unwrap();
        assert_eq!(r.row_count(), 1);
        assert_eq!(r.column("a"), Some(vec![&Value::Int(1)]));
    }

    #[test]
    fn unknown_source() {
        assert_eq!(connect("nonexistent", &[], None).unwrap_err(), ExecError::UnknownSource("nonexistent".into()));
    }
}
