//! Lexical routing of questions to specialized agents.
//!
//! Each registered agent is scored by how many of the question's content
//! tokens it recognizes, from three vocabularies:
//!
//! * schema: entity names, field names, relationship types, enumerated values
//! * lexicon: trigger words for the source kind, plus per-agent extras
//! * examples: the best overlap with any one few-shot example question
//!
//! `score = (w_s·schema + w_l·lexicon + w_e·examples) / (n · (w_s + w_l + w_e))`
//! where `n` is the number of distinct content tokens in the question. The
//! score lies in `[0, 1]` and does not change when all weights are scaled.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DataSourceKind, Dialect, UserQuery};
use crate::prompt::ExampleSet;
use crate::schema::SchemaDescriptor;

pub const DEFAULT_THRESHOLD: f64 = 0.15;

/// Scores closer than this are ties and fall back to registration order.
const TIE_EPSILON: f64 = 1e-9;

const STOPWORDS: &[&str] = &[
    "a", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being", "by", "can",
    "could", "did", "display", "do", "does", "each", "every", "fetch", "find", "for", "from", "get", "give", "had",
    "has", "have", "he", "her", "his", "how", "i", "in", "into", "is", "it", "its", "list", "me", "my", "no",
    "not", "of", "on", "only", "or", "our", "per", "please", "retrieve", "return", "she", "should", "show", "some",
    "still", "tell", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "to", "was", "we", "were", "what", "when", "where", "which", "who", "whom", "whose", "will", "with", "would",
    "you", "your",
];

const RELATIONAL_LEXICON: &[&str] = &[
    "table", "row", "column", "sql", "start", "started", "end", "ordered", "sort", "recent", "recently", "most",
    "latest", "earliest", "count", "total", "name",
];
const DOCUMENT_LEXICON: &[&str] = &[
    "document", "collection", "json", "nested", "deadline", "due", "record", "embedded",
];
const GRAPH_LEXICON: &[&str] = &[
    "graph", "network", "node", "edge", "relationship", "connected", "collaborator", "collaborate",
    "collaborates", "collaborating", "coauthor", "co", "author", "colleague", "researcher", "research", "work",
    "works", "working", "neighbor", "field",
];
const SEARCH_LEXICON: &[&str] = &[
    "ticket", "support", "issue", "incident", "error", "bug", "search", "mention", "mentioning", "related",
    "about", "raised", "reported", "report", "log", "outage",
];

/// Whether `word` (lowercase) carries no routing signal.
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

pub fn kind_lexicon(kind: DataSourceKind) -> &'static [&'static str] {
    match kind {
        DataSourceKind::Relational => RELATIONAL_LEXICON,
        DataSourceKind::Document => DOCUMENT_LEXICON,
        DataSourceKind::Graph => GRAPH_LEXICON,
        DataSourceKind::Search => SEARCH_LEXICON,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RouterError {
    #[error("agent `{0}` is already registered")]
    DuplicateAgent(String),
    #[error("agent `{agent_id}` is declared {declared} but its schema `{source_id}` is {actual}")]
    KindMismatch {
        agent_id: String,
        source_id: String,
        declared: DataSourceKind,
        actual: DataSourceKind,
    },
    #[error("agent `{agent_id}` serves `{declared}` but was given the schema for `{actual}`")]
    SourceMismatch {
        agent_id: String,
        declared: String,
        actual: String,
    },
    #[error("agent `{agent_id}` speaks {expected} but its example set is {actual}")]
    ExampleDialectMismatch {
        agent_id: String,
        expected: Dialect,
        actual: Dialect,
    },
    #[error("no agents are registered")]
    EmptyRegistry,
    #[error("{}", crate::NO_SUITABLE_AGENT)]
    NoSuitableAgent { best: Option<(String, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingWeights {
    pub schema: f64,
    pub lexicon: f64,
    pub examples: f64,
}

impl Default for RoutingWeights {
    fn default() -> Self {
        Self {
            schema: 1.0,
            lexicon: 1.5,
            examples: 1.0,
        }
    }
}

impl RoutingWeights {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            schema: self.schema * factor,
            lexicon: self.lexicon * factor,
            examples: self.examples * factor,
        }
    }

    pub fn total(&self) -> f64 {
        self.schema + self.lexicon + self.examples
    }
}

/// Identity of a specialized agent and the source it serves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentDescriptor {
    agent_id: String,
    kind: DataSourceKind,
    source_id: String,
    dialect: Dialect,
    example_set_id: String,
    lexicon: Vec<String>,
}

impl AgentDescriptor {
    pub fn new(
        agent_id: impl Into<String>,
        kind: DataSourceKind,
        source_id: impl Into<String>,
        example_set_id: impl Into<String>,
    ) -> Self {
        Self {
            agent_id: agent_id.into(),
            kind,
            source_id: source_id.into(),
            dialect: kind.dialect(),
            example_set_id: example_set_id.into(),
            lexicon: Vec::new(),
        }
    }

    /// Extra trigger words for this agent on top of its kind's lexicon.
    pub fn with_lexicon<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.lexicon.extend(words.into_iter().map(Into::into));
        self
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn kind(&self) -> DataSourceKind {
        self.kind
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn example_set_id(&self) -> &str {
        &self.example_set_id
    }

    pub fn lexicon(&self) -> &[String] {
        &self.lexicon
    }
}

/// An agent together with everything needed to route to it and prompt it.
#[derive(Debug, Clone)]
pub struct RegisteredAgent {
    pub descriptor: AgentDescriptor,
    pub schema: SchemaDescriptor,
    pub examples: ExampleSet,
    schema_vocab: BTreeSet<String>,
    lexicon_vocab: BTreeSet<String>,
    example_vocab: Vec<BTreeSet<String>>,
}

/// Setup-time, append-only collection of agents.
#[derive(Debug, Clone, Default)]
pub struct AgentRegistry {
    agents: Vec<RegisteredAgent>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_agent(
        &mut self,
        descriptor: AgentDescriptor,
        schema: SchemaDescriptor,
        examples: ExampleSet,
    ) -> Result<(), RouterError> {
        if self.agents.iter().any(|a| a.descriptor.agent_id == descriptor.agent_id) {
            return Err(RouterError::DuplicateAgent(descriptor.agent_id));
        }
        if descriptor.source_id != schema.source_id() {
            return Err(RouterError::SourceMismatch {
                agent_id: descriptor.agent_id,
                declared: descriptor.source_id,
                actual: schema.source_id().to_string(),
            });
        }
        if descriptor.kind != schema.kind() {
            return Err(RouterError::KindMismatch {
                agent_id: descriptor.agent_id,
                source_id: descriptor.source_id,
                declared: descriptor.kind,
                actual: schema.kind(),
            });
        }
        if examples.dialect() != descriptor.dialect {
            return Err(RouterError::ExampleDialectMismatch {
                agent_id: descriptor.agent_id,
                expected: descriptor.dialect,
                actual: examples.dialect(),
            });
        }
        let schema_vocab = schema_vocabulary(&schema);
        let lexicon_vocab = kind_lexicon(descriptor.kind)
            .iter()
            .copied()
            .chain(descriptor.lexicon.iter().map(String::as_str))
            .flat_map(content_tokens)
            .collect();
        let example_vocab = examples
            .examples()
            .iter()
            .map(|e| content_tokens(&e.question).into_iter().collect())
            .collect();
        self.agents.push(RegisteredAgent {
            descriptor,
            schema,
            examples,
            schema_vocab,
            lexicon_vocab,
            example_vocab,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Ends registration. The returned router is immutable.
    pub fn freeze(self, weights: RoutingWeights, threshold: f64) -> Router {
        Router {
            agents: self.agents,
            weights,
            threshold,
        }
    }
}

/// The outcome of routing one question.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingDecision {
    source_id: String,
    agent_id: String,
    score: f64,
    runner_up_scores: Vec<(String, f64)>,
}

impl RoutingDecision {
    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Every other agent's score, in registration order.
    pub fn runner_up_scores(&self) -> &[(String, f64)] {
        &self.runner_up_scores
    }
}

/// A frozen registry with its scoring configuration.
#[derive(Debug, Clone)]
pub struct Router {
    agents: Vec<RegisteredAgent>,
    weights: RoutingWeights,
    threshold: f64,
}

impl Router {
    pub fn agents(&self) -> &[RegisteredAgent] {
        &self.agents
    }

    pub fn agent(&self, agent_id: &str) -> Option<&RegisteredAgent> {
        self.agents.iter().find(|a| a.descriptor.agent_id == agent_id)
    }

    pub fn agent_for_source(&self, source_id: &str) -> Option<&RegisteredAgent> {
        self.agents.iter().find(|a| a.descriptor.source_id == source_id)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn weights(&self) -> &RoutingWeights {
        &self.weights
    }

    /// Scores for every agent, in registration order.
    pub fn scores(&self, text: &str) -> Vec<(String, f64)> {
        let q: BTreeSet<String> = content_tokens(text).into_iter().collect();
        self.agents
            .iter()
            .map(|a| (a.descriptor.agent_id.clone(), score(&q, a, &self.weights)))
            .collect()
    }

    pub fn identify_data_source(&self, query: &UserQuery) -> Result<RoutingDecision, RouterError> {
        if self.agents.is_empty() {
            return Err(RouterError::EmptyRegistry);
        }
        let scores = self.scores(query.text());
        let mut best = 0;
        for (i, (_, s)) in scores.iter().enumerate().skip(1) {
            if *s > scores[best].1 + TIE_EPSILON {
                best = i;
            }
        }
        let (agent_id, best_score) = scores[best].clone();
        if best_score + TIE_EPSILON < self.threshold || best_score <= 0.0 {
            return Err(RouterError::NoSuitableAgent {
                best: Some((agent_id, best_score)),
            });
        }
        let runner_up_scores = scores
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, s)| s)
            .collect();
        Ok(RoutingDecision {
            source_id: self.agents[best].descriptor.source_id.clone(),
            agent_id,
            score: best_score,
            runner_up_scores,
        })
    }
}

fn score(q: &BTreeSet<String>, agent: &RegisteredAgent, w: &RoutingWeights) -> f64 {
    if q.is_empty() || w.total() <= 0.0 {
        return 0.0;
    }
    let schema = q.intersection(&agent.schema_vocab).count() as f64;
    let lexicon = q.intersection(&agent.lexicon_vocab).count() as f64;
    let examples = agent
        .example_vocab
        .iter()
        .map(|e| q.intersection(e).count())
        .max()
        .unwrap_or(0) as f64;
    let raw = (w.schema * schema + w.lexicon * lexicon + w.examples * examples) / (q.len() as f64 * w.total());
    raw.clamp(0.0, 1.0)
}

fn schema_vocabulary(schema: &SchemaDescriptor) -> BTreeSet<String> {
    let mut words: Vec<&str> = Vec::new();
    for e in schema.entities() {
        words.push(&e.name);
        words.extend(e.fields.iter().map(|f| f.name.as_str()));
        words.extend(e.values.values().flatten().map(String::as_str));
    }
    for r in schema.relationships() {
        words.push(&r.rel_type);
    }
    words.into_iter().flat_map(content_tokens).collect()
}

/// Lowercased content words of `text`: split on non-alphanumerics and
/// camelCase boundaries, plural `s` dropped, stopwords and bare numbers
/// removed. Order of first appearance is kept.
pub fn content_tokens(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        for part in split_camel(word) {
            let lower = part.to_lowercase();
            if lower.is_empty() || lower.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            let stem = stem(&lower);
            if STOPWORDS.contains(&stem.as_str()) || STOPWORDS.contains(&lower.as_str()) {
                continue;
            }
            if !out.contains(&stem) {
                out.push(stem);
            }
        }
    }
    out
}

fn split_camel(word: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    for w in chars.windows(2) {
        let ((_, a), (j, b)) = (w[0], w[1]);
        if a.is_lowercase() && b.is_uppercase() {
            parts.push(&word[start..j]);
            start = j;
        }
    }
    parts.push(&word[start..]);
    parts
}

fn stem(word: &str) -> String {
    if word.chars().count() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}
