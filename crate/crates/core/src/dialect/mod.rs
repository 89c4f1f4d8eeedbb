//! Parsers and read-only gates for the four query dialects.
//!
//! Each parser accepts a deliberately small subset of its language and
//! produces a typed AST that the in-memory executors evaluate directly.
//! Every AST has a canonical `render` that parses back to an equal value.
//!
//! Input is whitespace-normalized before parsing, so error positions are
//! byte offsets into [`normalize_query_whitespace`]'s output.

mod document;
mod graph;
mod json;
mod lexer;
mod search;
mod sql;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Dialect, Value};

pub use document::{validate_document_filter, Condition, DocumentFilterQuery};
pub use graph::{validate_graph_pattern, Direction, GraphPatternQuery, Hop, NodePattern, PropertyRef, WhereComparison};
pub use search::{validate_search_dsl, MatchClause, SearchDslQuery};
pub use sql::{validate_sql, Comparison, OrderBy, Predicate, Projection, SortDirection, SqlSelect};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("parse error at byte {position}: expected {expected}, found {found}")]
    ParseError {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("read-only violation at byte {position}: `{keyword}` is not allowed")]
    ReadOnlyViolation { keyword: String, position: usize },
    #[error("unsupported pattern at byte {position}: {detail}")]
    UnsupportedPattern { position: usize, detail: String },
    #[error("unsupported clause `{clause}` at byte {position}")]
    UnsupportedClause { clause: String, position: usize },
}

impl ValidationError {
    pub(crate) fn parse(position: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Self::ParseError {
            position,
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub fn is_read_only_violation(&self) -> bool {
        matches!(self, Self::ReadOnlyViolation { .. })
    }
}

/// Binary comparison shared by SQL predicates and graph `WHERE` clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub(crate) fn from_punct(p: &str) -> Option<Self> {
        Some(match p {
            "=" => Self::Eq,
            "!=" | "<>" => Self::Ne,
            "<" => Self::Lt,
            "<=" => Self::Le,
            ">" => Self::Gt,
            ">=" => Self::Ge,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Eq => "=",
            Self::Ne => "<>",
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A validated query in any of the four dialects.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "dialect", rename_all = "snake_case")]
pub enum ParsedQuery {
    Sql(SqlSelect),
    DocumentFilter(DocumentFilterQuery),
    GraphPattern(GraphPatternQuery),
    SearchDsl(SearchDslQuery),
}

impl ParsedQuery {
    pub fn dialect(&self) -> Dialect {
        match self {
            Self::Sql(_) => Dialect::Sql,
            Self::DocumentFilter(_) => Dialect::DocumentFilter,
            Self::GraphPattern(_) => Dialect::GraphPattern,
            Self::SearchDsl(_) => Dialect::SearchDsl,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Self::Sql(q) => q.render(),
            Self::DocumentFilter(q) => q.render(),
            Self::GraphPattern(q) => q.render(),
            Self::SearchDsl(q) => q.render(),
        }
    }
}

/// Parses `text` under `dialect`.
pub fn validate(dialect: Dialect, text: &str) -> Result<ParsedQuery, ValidationError> {
    Ok(match dialect {
        Dialect::Sql => ParsedQuery::Sql(validate_sql(text)?),
        Dialect::DocumentFilter => ParsedQuery::DocumentFilter(validate_document_filter(text)?),
        Dialect::GraphPattern => ParsedQuery::GraphPattern(validate_graph_pattern(text)?),
        Dialect::SearchDsl => ParsedQuery::SearchDsl(validate_search_dsl(text)?),
    })
}

/// Collapses every whitespace run outside quoted strings to one space and
/// trims the ends. Quoted content, including escapes, is left untouched.
pub fn normalize_query_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut pending_space = false;
    for c in text.chars() {
        if let Some(q) = quote {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        if c == '\'' || c == '"' {
            quote = Some(c);
        }
        out.push(c);
    }
    out
}

/// Turns a signed numeric lexeme into an `Int` or `Float` literal.
pub(crate) fn number_value(raw: &str, negative: bool, position: usize) -> Result<Value, ValidationError> {
    let signed = if negative { format!("-{raw}") } else { raw.to_string() };
    if !raw.contains(['.', 'e', 'E']) {
        if let Ok(i) = signed.parse::<i64>() {
            return Ok(Value::Int(i));
        }
    }
    match signed.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Value::Float(x)),
        _ => Err(ValidationError::parse(position, "a finite number", format!("number {signed}"))),
    }
}

/// Renders a float so that it lexes back as a float with the same value.
pub(crate) fn render_float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}
