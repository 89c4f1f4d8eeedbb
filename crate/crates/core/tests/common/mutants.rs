//! Single-token deletions of reference queries.

use std::ops::Range;
use std::path::Path;

use polyrag_core::model::Dialect;
use regex::Regex;

/// The eight reference queries with their dialects, in a fixed order.
pub const REFERENCE_QUERIES: [(&str, Dialect); 8] = [
    ("es_example1.json", Dialect::SearchDsl),
    ("es_example2.json", Dialect::SearchDsl),
    ("mysql_example1.sql", Dialect::Sql),
    ("mysql_example2.sql", Dialect::Sql),
    ("mongodb_example1.js", Dialect::DocumentFilter),
    ("mongodb_example2.js", Dialect::DocumentFilter),
    ("neo4j_example1.cypher", Dialect::GraphPattern),
    ("neo4j_example2.cypher", Dialect::GraphPattern),
];

pub fn reference_queries(fixtures: &Path) -> Vec<(String, String, Dialect)> {
    REFERENCE_QUERIES
        .iter()
        .map(|(file, d)| {
            let text = std::fs::read_to_string(fixtures.join("queries").join(file)).unwrap();
            (file.to_string(), text, *d)
        })
        .collect()
}

/// Byte spans of lexical tokens: quoted strings, arrows, words, numbers,
/// and single punctuation characters.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let re = Regex::new(r#"'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*"|->|<-|[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|\S"#).unwrap();
    re.find_iter(text).map(|m| m.range()).collect()
}

/// Every deletion except the trailing statement terminator, which the
/// grammars treat as optional.
pub fn deletions(text: &str) -> Vec<(String, String)> {
    let spans = token_spans(text);
    spans
        .iter()
        .enumerate()
        .filter(|(i, s)| !(*i == spans.len() - 1 && &text[(*s).clone()] == ";"))
        .map(|(_, s)| {
            let mut m = String::with_capacity(text.len());
            m.push_str(&text[..s.start]);
            m.push(' ');
            m.push_str(&text[s.end..]);
            (text[s.clone()].to_string(), m)
        })
        .collect()
}

/// The deletion at the middle of the candidate list.
pub fn middle_deletion(text: &str) -> (String, String) {
    let all = deletions(text);
    all[all.len() / 2].clone()
}
