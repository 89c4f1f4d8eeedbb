//! `{"query": {"bool": {"must": [{"match": {field: text}}, ...]}}}`

use serde::Serialize;

use super::json::{parse_strict, quote, Json, JsonKind, Member};
use super::{normalize_query_whitespace, ValidationError};
use crate::model::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchClause {
    pub field: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchDslQuery {
    /// Bound from the agent's source, since query bodies never name it.
    pub index: Option<String>,
    pub must: Vec<MatchClause>,
}

impl SearchDslQuery {
    pub fn with_index(mut self, index: impl Into<String>) -> Self {
        self.index = Some(index.into());
        self
    }

    /// Pretty-printed body in the two-space layout used by the examples.
    /// The index is not part of the body.
    pub fn render(&self) -> String {
        let clauses: Vec<String> = self
            .must
            .iter()
            .map(|c| format!("        {{ \"match\": {{ {}: {} }}}}", quote(&c.field), quote(&c.text)))
            .collect();
        format!(
            "{{\n  \"query\": {{\n    \"bool\": {{\n      \"must\": [\n{}\n      ]\n    }}\n  }}\n}}",
            clauses.join(",\n")
        )
    }
}

pub fn validate_search_dsl(text: &str) -> Result<SearchDslQuery, ValidationError> {
    let norm = normalize_query_whitespace(text);
    let doc = parse_strict(&norm)?;
    let query = only_member(&doc, "query", "the top-level object")?;
    let bool_ = only_member(query, "bool", "`query`")?;
    let must = only_member(bool_, "must", "`bool`")?;
    let JsonKind::Array(items) = &must.kind else {
        return Err(ValidationError::parse(must.start, "an array of match clauses", "a non-array value"));
    };
    if items.is_empty() {
        return Err(ValidationError::parse(must.start, "at least one match clause", "an empty array"));
    }
    let mut clauses = Vec::with_capacity(items.len());
    for item in items {
        let matched = only_member(item, "match", "a `must` entry")?;
        let JsonKind::Object(fields) = &matched.kind else {
            return Err(ValidationError::parse(matched.start, "a field object", "a non-object value"));
        };
        let [Member { key, key_pos, value }] = fields.as_slice() else {
            return Err(ValidationError::parse(
                matched.start,
                "exactly one field per match clause",
                format!("{} fields", fields.len()),
            ));
        };
        if key.is_empty() {
            return Err(ValidationError::parse(*key_pos, "a field name", "empty key"));
        }
        match &value.kind {
            JsonKind::Scalar(Value::Str(s)) => clauses.push(MatchClause {
                field: key.clone(),
                text: s.clone(),
            }),
            JsonKind::Object(opts) => {
                return Err(ValidationError::UnsupportedClause {
                    clause: opts.first().map_or_else(|| "match options".to_string(), |m| m.key.clone()),
                    position: value.start,
                })
            }
            _ => return Err(ValidationError::parse(value.start, "a string to match", "a non-string value")),
        }
    }
    Ok(SearchDslQuery {
        index: None,
        must: clauses,
    })
}

/// Requires `node` to be an object whose only key is `key`. Any other key is
/// a clause outside the supported subset.
fn only_member<'a>(node: &'a Json, key: &str, context: &str) -> Result<&'a Json, ValidationError> {
    let JsonKind::Object(members) = &node.kind else {
        return Err(ValidationError::parse(node.start, format!("an object for {context}"), "a non-object value"));
    };
    if let Some(extra) = members.iter().find(|m| m.key != key) {
        return Err(ValidationError::UnsupportedClause {
            clause: extra.key.clone(),
            position: extra.key_pos,
        });
    }
    members
        .first()
        .map(|m| &m.value)
        .ok_or_else(|| ValidationError::parse(node.start, format!("`{key}` in {context}"), "an empty object"))
}
