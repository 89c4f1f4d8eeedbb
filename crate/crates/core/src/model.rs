//! Shared domain types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("question text is empty")]
    EmptyQuestion,
}

/// Output layout requested by the user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    #[default]
    PlainText,
    Table,
}

impl FromStr for ResponseFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" | "plain_text" | "text" => Ok(Self::PlainText),
            "table" => Ok(Self::Table),
            other => Err(format!("unknown response format `{other}`")),
        }
    }
}

/// A natural-language question submitted by a user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserQuery {
    text: String,
    session_id: String,
    format: ResponseFormat,
}

impl UserQuery {
    /// Creates a query with a fresh random session id.
    pub fn new(text: impl Into<String>) -> Result<Self, QueryError> {
        Self::with_session(text, uuid::Uuid::new_v4().to_string())
    }

    pub fn with_session(text: impl Into<String>, session_id: impl Into<String>) -> Result<Self, QueryError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(QueryError::EmptyQuestion);
        }
        Ok(Self {
            text,
            session_id: session_id.into(),
            format: ResponseFormat::PlainText,
        })
    }

    pub fn format(mut self, format: ResponseFormat) -> Self {
        self.format = format;
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn requested_format(&self) -> ResponseFormat {
        self.format
    }
}

/// The four families of data store the system can federate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSourceKind {
    Relational,
    Document,
    Graph,
    Search,
}

impl DataSourceKind {
    pub const ALL: [DataSourceKind; 4] = [Self::Relational, Self::Document, Self::Graph, Self::Search];

    /// The query dialect spoken by agents serving this kind of store.
    pub fn dialect(self) -> Dialect {
        match self {
            Self::Relational => Dialect::Sql,
            Self::Document => Dialect::DocumentFilter,
            Self::Graph => Dialect::GraphPattern,
            Self::Search => Dialect::SearchDsl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Relational => "relational",
            Self::Document => "document",
            Self::Graph => "graph",
            Self::Search => "search",
        }
    }
}

impl fmt::Display for DataSourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataSourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown data source kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    Sql,
    DocumentFilter,
    GraphPattern,
    SearchDsl,
}

impl Dialect {
    pub const ALL: [Dialect; 4] = [Self::Sql, Self::DocumentFilter, Self::GraphPattern, Self::SearchDsl];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sql => "sql",
            Self::DocumentFilter => "document_filter",
            Self::GraphPattern => "graph_pattern",
            Self::SearchDsl => "search_dsl",
        }
    }

    /// Human-facing language name used in prompt instructions.
    pub fn language_name(self) -> &'static str {
        match self {
            Self::Sql => "SQL",
            Self::DocumentFilter => "MongoDB find",
            Self::GraphPattern => "Cypher",
            Self::SearchDsl => "Elasticsearch query DSL",
        }
    }

    pub fn kind(self) -> DataSourceKind {
        match self {
            Self::Sql => DataSourceKind::Relational,
            Self::DocumentFilter => DataSourceKind::Document,
            Self::GraphPattern => DataSourceKind::Graph,
            Self::SearchDsl => DataSourceKind::Search,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sql" | "mysql" => Ok(Self::Sql),
            "document_filter" | "document" | "mongodb" => Ok(Self::DocumentFilter),
            "graph_pattern" | "graph" | "cypher" => Ok(Self::GraphPattern),
            "search_dsl" | "search" | "elasticsearch" => Ok(Self::SearchDsl),
            other => Err(format!("unknown dialect `{other}`")),
        }
    }
}

/// A scalar cell value returned by a backend or written as a query literal.
///
/// Dates are ISO-8601 strings; they compare as strings, which orders them
/// correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    #[serde(skip_deserializing)]
    Date(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Date(_) => "date",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Converts a JSON scalar. Arrays and objects have no scalar form.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        Some(match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Float(n.as_f64()?),
            },
            serde_json::Value::String(s) => Value::Str(s.clone()),
            _ => return None,
        })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) | Value::Date(s) => f.write_str(s),
        }
    }
}
