//! Query generation by specialized agents.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dialect::{self, ParsedQuery, ValidationError};
use crate::gateway::{Gateway, ProviderError};
use crate::model::{Dialect, UserQuery};
use crate::pipeline::{Outcome, Stage};
use crate::prompt::{build_agent_prompt_with_feedback, PromptError};
use crate::router::RegisteredAgent;
use crate::schema::SchemaDescriptor;
use crate::tokens::TokenCount;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("no {0} query found in the completion")]
    NoQueryFound(Dialect),
    #[error("query generation failed after a retry: {}", diagnostics.join(" | "))]
    GenerationFailed { diagnostics: Vec<String> },
    #[error(transparent)]
    ProviderUnavailable(ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FirstAttempt,
    Retry,
}

/// A query that has passed its dialect validator. There is no other way to
/// build one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedQuery {
    dialect: Dialect,
    text: String,
    parsed: ParsedQuery,
    source_id: String,
    provenance: Provenance,
}

impl GeneratedQuery {
    /// Validates `text` in the schema's dialect. Search queries are bound to
    /// the schema's index, since their bodies never name it.
    pub fn validate(schema: &SchemaDescriptor, text: &str, provenance: Provenance) -> Result<Self, ValidationError> {
        let dialect = schema.kind().dialect();
        let parsed = match dialect::validate(dialect, text)? {
            ParsedQuery::SearchDsl(q) => match schema.entities().first() {
                Some(index) => ParsedQuery::SearchDsl(q.with_index(&index.name)),
                None => ParsedQuery::SearchDsl(q),
            },
            other => other,
        };
        Ok(Self {
            dialect,
            text: text.to_string(),
            parsed,
            source_id: schema.source_id().to_string(),
            provenance,
        })
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn parsed(&self) -> &ParsedQuery {
        &self.parsed
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// One timed step of generation, reported to telemetry by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentStep {
    pub stage: Stage,
    pub duration_ms: u64,
    pub tokens_in: TokenCount,
    pub tokens_out: TokenCount,
    pub outcome: Outcome,
    pub note: Option<String>,
}

#[derive(Debug)]
pub struct Generation {
    pub outcome: Result<GeneratedQuery, AgentError>,
    pub steps: Vec<AgentStep>,
}

pub fn generate_query(agent: &RegisteredAgent, query: &UserQuery, gateway: &Gateway) -> Result<GeneratedQuery, AgentError> {
    generate_query_traced(agent, query, gateway).outcome
}

/// Builds the prompt, completes, extracts and validates, re-prompting once
/// with the first failure's diagnostic. Provider refusals count as failed
/// attempts; an unavailable provider ends generation immediately.
pub fn generate_query_traced(agent: &RegisteredAgent, query: &UserQuery, gateway: &Gateway) -> Generation {
    let mut steps = Vec::new();
    let mut diagnostics: Vec<String> = Vec::new();
    let dialect = agent.descriptor.dialect();

    for (attempt, provenance) in [Provenance::FirstAttempt, Provenance::Retry].into_iter().enumerate() {
        let last = attempt == 1;
        let feedback = diagnostics.last().map(String::as_str);
        let started = Instant::now();
        let prompt = match build_agent_prompt_with_feedback(
            agent.descriptor.agent_id(),
            query,
            &agent.schema,
            agent.examples.examples(),
            gateway.profile(),
            feedback,
        ) {
            Ok(p) => p,
            Err(e) => {
                steps.push(step(Stage::Prompt, started, TokenCount::ZERO, Outcome::Failed, Some(e.to_string())));
                return Generation {
                    outcome: Err(e.into()),
                    steps,
                };
            }
        };
        let tokens_in = prompt.token_count();
        let request = gateway.request(prompt);
        if attempt == 0 {
            let outcome = if request.is_ok() { Outcome::Ok } else { Outcome::Failed };
            let note = request.as_ref().err().map(ToString::to_string);
            steps.push(step(Stage::Prompt, started, TokenCount::ZERO, outcome, note));
        }
        let request = match request {
            Ok(r) => r,
            Err(e) => {
                if attempt == 1 {
                    steps.push(step(Stage::Complete, started, TokenCount::ZERO, Outcome::Failed, Some(e.to_string())));
                }
                return Generation {
                    outcome: Err(e.into()),
                    steps,
                };
            }
        };

        let started = Instant::now();
        let completion = match gateway.complete(&request) {
            Ok(c) => c,
            Err(ProviderError::Unavailable(msg)) => {
                let err = ProviderError::Unavailable(msg);
                steps.push(step(Stage::Complete, started, tokens_in, Outcome::Failed, Some(err.to_string())));
                return Generation {
                    outcome: Err(AgentError::ProviderUnavailable(err)),
                    steps,
                };
            }
            Err(refusal) => {
                let outcome = if last { Outcome::Failed } else { Outcome::Retried };
                steps.push(step(Stage::Complete, started, tokens_in, outcome, Some(refusal.to_string())));
                diagnostics.push(refusal.to_string());
                continue;
            }
        };
        let mut done = step(Stage::Complete, started, tokens_in, Outcome::Ok, None);
        done.tokens_out = completion.output_token_estimate;
        steps.push(done);

        let started = Instant::now();
        let checked = extract_query_from_completion(&completion.text, dialect)
            .map_err(|e| e.to_string())
            .and_then(|text| GeneratedQuery::validate(&agent.schema, &text, provenance).map_err(|e| e.to_string()));
        match checked {
            Ok(generated) => {
                steps.push(step(Stage::Validate, started, TokenCount::ZERO, Outcome::Ok, None));
                return Generation {
                    outcome: Ok(generated),
                    steps,
                };
            }
            Err(diag) => {
                let outcome = if last { Outcome::Failed } else { Outcome::Retried };
                steps.push(step(Stage::Validate, started, TokenCount::ZERO, outcome, Some(diag.clone())));
                diagnostics.push(diag);
            }
        }
    }
    Generation {
        outcome: Err(AgentError::GenerationFailed { diagnostics }),
        steps,
    }
}

fn step(stage: Stage, started: Instant, tokens_in: TokenCount, outcome: Outcome, note: Option<String>) -> AgentStep {
    AgentStep {
        stage,
        duration_ms: started.elapsed().as_millis() as u64,
        tokens_in,
        tokens_out: TokenCount::ZERO,
        outcome,
        note,
    }
}

const SQL_ANCHORS: &[&str] = &[
    "SELECT", "WITH", "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "TRUNCATE", "REPLACE", "MERGE",
    "GRANT", "REVOKE",
];
const GRAPH_ANCHORS: &[&str] = &["MATCH", "OPTIONAL", "CREATE", "MERGE", "UNWIND", "CALL"];

/// Cuts the query out of a completion that may wrap it in prose or a code
/// fence. Applying it to its own output returns that output unchanged.
pub fn extract_query_from_completion(completion: &str, dialect: Dialect) -> Result<String, AgentError> {
    let text = fenced_block(completion).unwrap_or(completion);
    let start = find_anchor(text, dialect).ok_or(AgentError::NoQueryFound(dialect))?;
    let rest = &text[start..];
    let end = match dialect {
        Dialect::Sql | Dialect::GraphPattern => statement_end(rest),
        Dialect::DocumentFilter => call_end(rest),
        Dialect::SearchDsl => balanced_end(rest, b'{', b'}'),
    };
    let candidate = rest[..end].trim();
    if candidate.is_empty() {
        return Err(AgentError::NoQueryFound(dialect));
    }
    Ok(candidate.to_string())
}

/// Contents of the first ``` fence. A single-word info string on the
/// opening line is skipped.
fn fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let mut body = &text[open + 3..];
    if let Some(nl) = body.find('\n') {
        let info = body[..nl].trim();
        if info.chars().all(|c| c.is_ascii_alphanumeric() || "+-_.".contains(c)) {
            body = &body[nl + 1..];
        }
    }
    Some(match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    })
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn word_at(text: &str, at: usize, word: &str, ignore_case: bool) -> bool {
    let bytes = text.as_bytes();
    let end = at + word.len();
    if end > bytes.len() || !text.is_char_boundary(at) || !text.is_char_boundary(end) {
        return false;
    }
    let slice = &text[at..end];
    let same = if ignore_case { slice.eq_ignore_ascii_case(word) } else { slice == word };
    same && (at == 0 || !is_word_byte(bytes[at - 1])) && (end == bytes.len() || !is_word_byte(bytes[end]))
}

fn find_anchor(text: &str, dialect: Dialect) -> Option<usize> {
    match dialect {
        Dialect::SearchDsl => text.find('{'),
        Dialect::DocumentFilter => {
            let at_line_start = line_starts(text).find(|&i| text[i..].starts_with("db."));
            at_line_start.or_else(|| {
                text.match_indices("db.")
                    .map(|(i, _)| i)
                    .find(|&i| i == 0 || !is_word_byte(text.as_bytes()[i - 1]))
            })
        }
        Dialect::Sql | Dialect::GraphPattern => {
            let words = if dialect == Dialect::Sql { SQL_ANCHORS } else { GRAPH_ANCHORS };
            let at_line_start = line_starts(text).find(|&i| words.iter().any(|w| word_at(text, i, w, true)));
            at_line_start.or_else(|| {
                (0..text.len()).find(|&i| words.iter().any(|w| word_at(text, i, w, false)))
            })
        }
    }
}

/// Byte offsets of the first non-blank character of every line.
fn line_starts(text: &str) -> impl Iterator<Item = usize> + '_ {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |line| {
        let here = offset;
        offset += line.len();
        let indent = line.len() - line.trim_start_matches([' ', '\t', '\r']).len();
        let i = here + indent;
        (i < here + line.len() && !line[indent..].starts_with('\n')).then_some(i)
    })
}

/// After the first `;` outside quotes or before the first blank line,
/// whichever comes first.
fn statement_end(text: &str) -> usize {
    let limit = blank_line(text).unwrap_or(text.len());
    let mut quote: Option<u8> = None;
    let bytes = &text.as_bytes()[..limit];
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(_) if b == b'\\' => i += 1,
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'\'' || b == b'"' => quote = Some(b),
            None if b == b';' => return i + 1,
            None => {}
        }
        i += 1;
    }
    limit
}

fn blank_line(text: &str) -> Option<usize> {
    let mut offset = 0;
    let mut prev_newline: Option<usize> = None;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() && prev_newline.is_some() && line.ends_with('\n') {
            return prev_newline;
        }
        offset += line.len();
        prev_newline = line.ends_with('\n').then_some(offset - 1);
    }
    None
}

/// Through the `)` closing the first `(`, plus a directly following `;`.
fn call_end(text: &str) -> usize {
    let Some(open) = text.find('(') else {
        return statement_end(text);
    };
    let close = open + balanced_end(&text[open..], b'(', b')');
    let after = &text[close..];
    let trimmed = after.trim_start_matches([' ', '\t']);
    if trimmed.starts_with(';') {
        close + (after.len() - trimmed.len()) + 1
    } else {
        close
    }
}

/// Length through the bracket closing the one at `text[0]`, skipping
/// quoted strings; the whole text if it never closes.
fn balanced_end(text: &str, open: u8, close: u8) -> usize {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(_) if b == b'\\' => i += 1,
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'\'' || b == b'"' => quote = Some(b),
            None if b == open => depth += 1,
            None if b == close => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return i + 1;
                }
            }
            None => {}
        }
        i += 1;
    }
    text.len()
}
