//! Prompt assembly for the specialized agents, the monolithic baseline and
//! the synthesis step.
//!
//! Every prompt has four sections in a fixed order: instruction, schema,
//! examples, question. Section ranges are byte offsets into the body; the
//! short headers between sections belong to no section.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialect::{self, ValidationError};
use crate::model::{Dialect, ResponseFormat, UserQuery, Value};
use crate::router::{RegisteredAgent, Router};
use crate::schema::SchemaDescriptor;
use crate::tokens::{estimate_tokens, ModelProfile, TokenCount};

pub const DEFAULT_COMPLETION_RESERVE: u64 = 256;
pub const MONOLITHIC_AGENT_ID: &str = "monolithic";

const SCHEMA_HEADER: &str = "\n\nSchema:\n";
const EXAMPLES_HEADER: &str = "\n\nExamples:\n\n";
const QUESTION_SEPARATOR: &str = "\n\n";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("an agent prompt needs at least one few-shot example")]
    NoExamples,
    #[error("a monolithic prompt needs at least two sources, got {0}")]
    InsufficientSources(usize),
    #[error("prompt of {token_count} tokens plus a {reserve}-token completion reserve exceeds the {window}-token context window")]
    WindowExceeded {
        token_count: TokenCount,
        window: u64,
        reserve: u64,
    },
    #[error("example {index} of set `{set}` is not a valid {dialect} query: {error}")]
    InvalidExample {
        set: String,
        index: usize,
        dialect: Dialect,
        error: ValidationError,
    },
    #[error("cannot read example set {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse example set {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub question: String,
    #[serde(rename = "query")]
    pub expected_query: String,
}

impl FewShotExample {
    pub fn new(question: impl Into<String>, expected_query: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            expected_query: expected_query.into(),
        }
    }

    fn render(&self) -> String {
        format!("Question: {}\nQuery:\n{}", self.question, self.expected_query)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleSetFile {
    example_set: String,
    examples: Vec<FewShotExample>,
}

/// A named, ordered list of examples whose queries all pass one dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleSet {
    id: String,
    dialect: Dialect,
    examples: Vec<FewShotExample>,
}

impl ExampleSet {
    pub fn new(id: impl Into<String>, dialect: Dialect, examples: Vec<FewShotExample>) -> Result<Self, PromptError> {
        let id = id.into();
        for (index, ex) in examples.iter().enumerate() {
            dialect::validate(dialect, &ex.expected_query).map_err(|error| PromptError::InvalidExample {
                set: id.clone(),
                index,
                dialect,
                error,
            })?;
        }
        Ok(Self { id, dialect, examples })
    }

    pub fn load(path: impl AsRef<Path>, dialect: Dialect) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ExampleSetFile = toml::from_str(&text).map_err(|e| PromptError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::new(file.example_set, dialect, file.examples)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn examples(&self) -> &[FewShotExample] {
        &self.examples
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectionOffsets {
    pub instruction: Range<usize>,
    pub schema: Range<usize>,
    pub examples: Range<usize>,
    pub question: Range<usize>,
}

impl SectionOffsets {
    pub fn in_order(&self) -> bool {
        self.instruction.start <= self.instruction.end
            && self.instruction.end <= self.schema.start
            && self.schema.end <= self.examples.start
            && self.examples.end <= self.question.start
            && self.question.end >= self.question.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    agent_id: String,
    body: String,
    token_count: TokenCount,
    sections: SectionOffsets,
}

impl Prompt {
    /// A prompt whose whole body is its question section. Useful for
    /// budget checks on arbitrary text.
    pub fn freeform(agent_id: impl Into<String>, body: impl Into<String>, profile: &ModelProfile) -> Self {
        let body = body.into();
        let len = body.len();
        Self {
            agent_id: agent_id.into(),
            token_count: estimate_tokens(&body, profile),
            body,
            sections: SectionOffsets {
                instruction: 0..0,
                schema: 0..0,
                examples: 0..0,
                question: 0..len,
            },
        }
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn token_count(&self) -> TokenCount {
        self.token_count
    }

    pub fn sections(&self) -> &SectionOffsets {
        &self.sections
    }

    pub fn instruction(&self) -> &str {
        &self.body[self.sections.instruction.clone()]
    }

    pub fn schema_section(&self) -> &str {
        &self.body[self.sections.schema.clone()]
    }

    pub fn examples_section(&self) -> &str {
        &self.body[self.sections.examples.clone()]
    }

    pub fn question_section(&self) -> &str {
        &self.body[self.sections.question.clone()]
    }
}

/// The four section texts of a prompt before assembly.
pub(crate) struct Sections<'a> {
    pub instruction: &'a str,
    pub schema_header: &'a str,
    pub schema: &'a str,
    pub examples_header: &'a str,
    pub examples: &'a str,
    pub question: &'a str,
}

pub(crate) fn assemble(agent_id: &str, parts: Sections<'_>, profile: &ModelProfile) -> Prompt {
    let mut body = String::with_capacity(
        parts.instruction.len() + parts.schema.len() + parts.examples.len() + parts.question.len() + 32,
    );
    let mut push = |text: &str| {
        let start = body.len();
        body.push_str(text);
        start..body.len()
    };
    let instruction = push(parts.instruction);
    push(parts.schema_header);
    let schema = push(parts.schema);
    push(parts.examples_header);
    let examples = push(parts.examples);
    push(QUESTION_SEPARATOR);
    let question = push(parts.question);
    Prompt {
        agent_id: agent_id.to_string(),
        token_count: estimate_tokens(&body, profile),
        body,
        sections: SectionOffsets {
            instruction,
            schema,
            examples,
            question,
        },
    }
}

pub fn instruction_for(dialect: Dialect) -> String {
    format!(
        "Generate a single read-only {} query. Output only the query.",
        dialect.language_name()
    )
}

/// Text of the question section. Validator feedback from a failed attempt
/// goes first so the question line stays last.
/// The question is put on one line, whitespace collapsed.
pub fn question_section(question: &str, feedback: Option<&str>) -> String {
    let question = one_line(question);
    match feedback {
        Some(note) => format!(
            "The previous query was rejected: {note}\nReturn a corrected query.\n\nQuestion: {question}\nQuery:\n"
        ),
        None => format!("Question: {question}\nQuery:\n"),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn render_examples(examples: &[FewShotExample]) -> String {
    examples.iter().map(FewShotExample::render).collect::<Vec<_>>().join("\n\n")
}

pub fn build_agent_prompt(
    agent_id: &str,
    query: &UserQuery,
    schema: &SchemaDescriptor,
    examples: &[FewShotExample],
    profile: &ModelProfile,
) -> Result<Prompt, PromptError> {
    build_agent_prompt_with_feedback(agent_id, query, schema, examples, profile, None)
}

pub fn build_agent_prompt_with_feedback(
    agent_id: &str,
    query: &UserQuery,
    schema: &SchemaDescriptor,
    examples: &[FewShotExample],
    profile: &ModelProfile,
    feedback: Option<&str>,
) -> Result<Prompt, PromptError> {
    if examples.is_empty() {
        return Err(PromptError::NoExamples);
    }
    let instruction = instruction_for(schema.kind().dialect());
    let examples = render_examples(examples);
    let question = question_section(query.text(), feedback);
    Ok(assemble(
        agent_id,
        Sections {
            instruction: &instruction,
            schema_header: SCHEMA_HEADER,
            schema: schema.rendered_block(),
            examples_header: EXAMPLES_HEADER,
            examples: &examples,
            question: &question,
        },
        profile,
    ))
}

/// One prompt carrying every schema and every example set, as a single
/// general-purpose agent would need.
pub fn build_monolithic_prompt(
    query: &UserQuery,
    sources: &[(&SchemaDescriptor, &[FewShotExample])],
    profile: &ModelProfile,
) -> Result<Prompt, PromptError> {
    if sources.len() < 2 {
        return Err(PromptError::InsufficientSources(sources.len()));
    }
    let languages: Vec<&str> = sources
        .iter()
        .map(|(s, _)| s.kind().dialect().language_name())
        .collect();
    let instruction = format!(
        "Pick the data source that can answer the question and generate a single read-only query for it in that \
         source's language ({}). Output only the query.",
        languages.join(", ")
    );
    let schema = sources
        .iter()
        .map(|(s, _)| s.rendered_block())
        .collect::<Vec<_>>()
        .join("\n\n");
    let examples = sources
        .iter()
        .map(|(s, ex)| {
            format!(
                "Examples for {} ({}):\n\n{}",
                s.source_id(),
                s.kind().dialect().language_name(),
                render_examples(ex)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    let question = question_section(query.text(), None);
    Ok(assemble(
        MONOLITHIC_AGENT_ID,
        Sections {
            instruction: &instruction,
            schema_header: "\n\nSchemas:\n",
            schema: &schema,
            examples_header: EXAMPLES_HEADER,
            examples: &examples,
            question: &question,
        },
        profile,
    ))
}

/// Prompt sizes for one question under the specialized and monolithic
/// designs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenComparison {
    pub question: String,
    pub agent_id: String,
    pub specialized: TokenCount,
    pub monolithic: TokenCount,
}

impl TokenComparison {
    pub fn ratio(&self) -> f64 {
        self.specialized.value() as f64 / self.monolithic.value() as f64
    }
}

/// Compares the prompt `agent` would get for `query` against the
/// monolithic prompt over every agent in `router`.
pub fn compare_prompt_tokens(
    router: &Router,
    agent: &RegisteredAgent,
    query: &UserQuery,
    profile: &ModelProfile,
) -> Result<TokenComparison, PromptError> {
    let specialized = build_agent_prompt(
        agent.descriptor.agent_id(),
        query,
        &agent.schema,
        agent.examples.examples(),
        profile,
    )?;
    let groups: Vec<_> = router
        .agents()
        .iter()
        .map(|a| (&a.schema, a.examples.examples()))
        .collect();
    let monolithic = build_monolithic_prompt(query, &groups, profile)?;
    Ok(TokenComparison {
        question: query.text().to_string(),
        agent_id: agent.descriptor.agent_id().to_string(),
        specialized: specialized.token_count(),
        monolithic: monolithic.token_count(),
    })
}

/// Mean of the per-question ratios; zero for an empty slice.
pub fn mean_ratio(comparisons: &[TokenComparison]) -> f64 {
    if comparisons.is_empty() {
        return 0.0;
    }
    comparisons.iter().map(TokenComparison::ratio).sum::<f64>() / comparisons.len() as f64
}

pub const SYNTHESIZER_AGENT_ID: &str = "synthesizer";
/// Rows serialized into a synthesis prompt; the rest are elided.
pub const SYNTHESIS_ROW_LIMIT: usize = 50;

const ELISION_PREFIX: &str = "... ";

/// Prompt asking for a natural-language answer over a query result.
///
/// The header section holds the column names as a JSON array and the true
/// row count; the examples section holds one JSON array per row.
pub fn build_synthesis_prompt(
    question: &str,
    columns: &[String],
    rows: &[Vec<Value>],
    format: ResponseFormat,
    profile: &ModelProfile,
) -> Prompt {
    let format_name = match format {
        ResponseFormat::PlainText => "plain",
        ResponseFormat::Table => "table",
    };
    let instruction = format!(
        "Answer the question using only the result rows below. Do not invent rows. Format: {format_name}."
    );
    let header = format!(
        "Columns: {}\nRow count: {}",
        serde_json::to_string(columns).expect("strings serialize"),
        rows.len()
    );
    let shown = rows.len().min(SYNTHESIS_ROW_LIMIT);
    let mut lines: Vec<String> = rows[..shown]
        .iter()
        .map(|r| serde_json::to_string(r).expect("values serialize"))
        .collect();
    if shown < rows.len() {
        lines.push(format!("{ELISION_PREFIX}{} more rows not shown", rows.len() - shown));
    }
    let body_rows = if lines.is_empty() { "(none)".to_string() } else { lines.join("\n") };
    let question = format!("Question: {}\nAnswer:\n", one_line(question));
    assemble(
        SYNTHESIZER_AGENT_ID,
        Sections {
            instruction: &instruction,
            schema_header: "\n\nResult:\n",
            schema: &header,
            examples_header: "\n\nRows:\n",
            examples: &body_rows,
            question: &question,
        },
        profile,
    )
}

/// The parts of a synthesis prompt, read back from its sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    pub question: String,
    pub format: ResponseFormat,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
    pub row_count: usize,
}

pub fn parse_synthesis_prompt(prompt: &Prompt) -> Option<SynthesisRequest> {
    let format = if prompt.instruction().ends_with("Format: table.") {
        ResponseFormat::Table
    } else {
        ResponseFormat::PlainText
    };
    let mut header = prompt.schema_section().lines();
    let columns = serde_json::from_str(header.next()?.strip_prefix("Columns: ")?).ok()?;
    let row_count = header.next()?.strip_prefix("Row count: ")?.parse().ok()?;
    let mut rows = Vec::new();
    for line in prompt.examples_section().lines() {
        if line == "(none)" || line.starts_with(ELISION_PREFIX) {
            continue;
        }
        rows.push(serde_json::from_str(line).ok()?);
    }
    let question = question_from_body(prompt.body())?.to_string();
    Some(SynthesisRequest {
        question,
        format,
        columns,
        rows,
        row_count,
    })
}

/// Ok iff the prompt plus the completion reserve fits in the profile's window.
pub fn enforce_context_window(prompt: &Prompt, profile: &ModelProfile, reserve: u64) -> Result<(), PromptError> {
    let window = profile.context_window();
    if prompt.token_count.value().saturating_add(reserve) <= window {
        Ok(())
    } else {
        Err(PromptError::WindowExceeded {
            token_count: prompt.token_count,
            window,
            reserve,
        })
    }
}

/// Pulls the question back out of a prompt body: the text after the last
/// `Question: ` line, up to the end of that line.
pub fn question_from_body(body: &str) -> Option<&str> {
    let idx = body
        .rmatch_indices("Question: ")
        .find(|(i, _)| *i == 0 || body.as_bytes()[i - 1] == b'\n')?
        .0;
    let rest = &body[idx + "Question: ".len()..];
    Some(rest.split('\n').next().unwrap_or(rest))
}
