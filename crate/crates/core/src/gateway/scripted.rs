//! Deterministic provider driven by an ordered rule table.
//!
//! ```toml
//! [[rules]]
//! agent = "mysql_agent"          # or "*" for any agent
//! pattern = "List all active projects handled by ${person}"
//! template = "SELECT project_name FROM Projects WHERE assigned_to = '${person}';"
//! ```
//!
//! The question is taken from the prompt's last `Question:` line and
//! normalized (see [`normalize_question`]). Patterns match the whole
//! question, case-insensitively; the first matching rule for the prompt's
//! agent wins. Prompts addressed to the synthesizer are answered by a
//! built-in template over the serialized rows.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use super::{CompletionProvider, CompletionRequest, ProviderError};
use crate::model::ResponseFormat;
use crate::prompt::{parse_synthesis_prompt, question_from_body, SynthesisRequest, SYNTHESIZER_AGENT_ID};
use crate::tokens::ProviderKind;

/// Slot captures exclude quotes, braces, parentheses, backslashes and
/// semicolons so a question can never break out of a template literal.
const SLOT_CLASS: &str = r#"[^'"\\{}();]+?"#;

#[derive(Debug, Error)]
pub enum ScriptedRuleError {
    #[error("rule {index}: bad slot name in pattern `{pattern}`")]
    BadSlot { index: usize, pattern: String },
    #[error("rule {index}: template uses slot `{slot}` that the pattern does not capture")]
    UnknownSlot { index: usize, slot: String },
    #[error("rule {index}: {message}")]
    Regex { index: usize, message: String },
    #[error("cannot read rule file {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse rule file {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub agent: String,
    pub pattern: String,
    pub template: String,
}

impl RuleSpec {
    pub fn new(agent: impl Into<String>, pattern: impl Into<String>, template: impl Into<String>) -> Self {
        Self {
            agent: agent.into(),
            pattern: pattern.into(),
            template: template.into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone)]
struct Rule {
    agent: String,
    regex: Regex,
    template: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    rules: Vec<Rule>,
}

/// Trims, collapses whitespace and drops trailing sentence punctuation.
pub fn normalize_question(q: &str) -> String {
    let collapsed = q.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['.', '?', '!']).trim_end().to_string()
}

fn slot_regex() -> Regex {
    Regex::new(r"\$\{([^}]*)\}").expect("static regex")
}

fn compile(index: usize, spec: &RuleSpec) -> Result<Rule, ScriptedRuleError> {
    let pattern = normalize_question(&spec.pattern);
    let slots = slot_regex();
    let mut re = String::from("(?i)^");
    let mut names = Vec::new();
    let mut last = 0;
    for cap in slots.captures_iter(&pattern) {
        let whole = cap.get(0).expect("group 0");
        let name = &cap[1];
        let valid = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !name.starts_with(|c: char| c.is_ascii_digit());
        if !valid || names.iter().any(|n| n == name) {
            return Err(ScriptedRuleError::BadSlot {
                index,
                pattern: spec.pattern.clone(),
            });
        }
        re.push_str(&regex::escape(&pattern[last..whole.start()]));
        re.push_str(&format!("(?P<{name}>{SLOT_CLASS})"));
        names.push(name.to_string());
        last = whole.end();
    }
    re.push_str(&regex::escape(&pattern[last..]));
    re.push('$');
    for cap in slots.captures_iter(&spec.template) {
        if !names.iter().any(|n| n == &cap[1]) {
            return Err(ScriptedRuleError::UnknownSlot {
                index,
                slot: cap[1].to_string(),
            });
        }
    }
    let regex = Regex::new(&re).map_err(|e| ScriptedRuleError::Regex {
        index,
        message: e.to_string(),
    })?;
    Ok(Rule {
        agent: spec.agent.clone(),
        regex,
        template: spec.template.clone(),
    })
}

impl ScriptedProvider {
    pub fn from_rules(specs: &[RuleSpec]) -> Result<Self, ScriptedRuleError> {
        let rules = specs
            .iter()
            .enumerate()
            .map(|(i, s)| compile(i, s))
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ScriptedRuleError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| ScriptedRuleError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_rules(&file.rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptedRuleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScriptedRuleError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Puts a rule ahead of all existing ones.
    pub fn prepend(&mut self, spec: &RuleSpec) -> Result<(), ScriptedRuleError> {
        let rule = compile(0, spec)?;
        self.rules.insert(0, rule);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Completion text for `question` addressed to `agent_id`, if any rule matches.
    pub fn answer(&self, agent_id: &str, question: &str) -> Option<String> {
        let q = normalize_question(question);
        self.rules
            .iter()
            .filter(|r| r.agent == agent_id || r.agent == "*")
            .find_map(|r| {
                let caps = r.regex.captures(&q)?;
                let out = slot_regex().replace_all(&r.template, |c: &regex::Captures<'_>| {
                    caps.name(&c[1]).map_or("", |m| m.as_str()).to_string()
                });
                Some(out.into_owned())
            })
    }
}

impl CompletionProvider for ScriptedProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Scripted
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let prompt = request.prompt();
        if prompt.agent_id() == SYNTHESIZER_AGENT_ID {
            let req = parse_synthesis_prompt(prompt)
                .ok_or_else(|| ProviderError::Refusal("synthesis prompt is not in the expected layout".into()))?;
            return Ok(render_answer(&req));
        }
        let question = question_from_body(prompt.body())
            .ok_or_else(|| ProviderError::Refusal("prompt has no question line".into()))?;
        self.answer(prompt.agent_id(), question).ok_or_else(|| {
            ProviderError::Refusal(format!(
                "no scripted rule for agent `{}` matches \"{}\"",
                prompt.agent_id(),
                normalize_question(question)
            ))
        })
    }
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

/// The scripted synthesizer's answer for a parsed synthesis request.
pub fn render_answer(req: &SynthesisRequest) -> String {
    let question = normalize_question(&req.question);
    if req.row_count == 0 {
        return format!("There are no matching records for \"{question}\" (0 rows).");
    }
    let elided = req.row_count.saturating_sub(req.rows.len());
    match req.format {
        ResponseFormat::PlainText => {
            let mut out = format!(
                "Found {} for \"{question}\":",
                plural(req.row_count, "matching record", "matching records")
            );
            for (i, row) in req.rows.iter().enumerate() {
                let fields: Vec<String> = req
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| format!("{c}: {}", cell(v)))
                    .collect();
                out.push_str(&format!("\n{}. {}", i + 1, fields.join("; ")));
            }
            if elided > 0 {
                out.push_str(&format!("\n... and {elided} more not shown."));
            }
            out
        }
        ResponseFormat::Table => {
            let cells: Vec<Vec<String>> = req.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let widths: Vec<usize> = req
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    cells
                        .iter()
                        .filter_map(|r| r.get(i))
                        .map(|s| s.chars().count())
                        .chain(std::iter::once(c.chars().count()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |values: &[String]| {
                values
                    .iter()
                    .zip(&widths)
                    .map(|(v, w)| format!("{v:<w$}"))
                    .collect::<Vec<_>>()
                    .join(" | ")
                    .trim_end()
                    .to_string()
            };
            let mut lines = vec![line(&req.columns)];
            lines.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
            lines.extend(cells.iter().map(|r| line(r)));
            let mut footer = format!("({})", plural(req.row_count, "row", "rows"));
            if elided > 0 {
                footer = format!("({}, {elided} not shown)", plural(req.row_count, "row", "rows"));
            }
            lines.push(footer);
            lines.join("\n")
        }
    }
}
