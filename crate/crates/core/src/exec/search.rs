use std::sync::RwLock;

use serde::Serialize;

use super::{dataset_array, digest_of, name_of, Backend, ExecError, Rows};
use crate::dialect::{ParsedQuery, SearchDslQuery};
use crate::model::{DataSourceKind, Value};

/// Lowercased alphanumeric runs of `text`.
pub fn search_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Field {
    name: String,
    value: Value,
    tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Index {
    name: String,
    documents: Vec<Vec<Field>>,
}

#[derive(Debug, Default)]
pub struct SearchBackend {
    indices: RwLock<Vec<Index>>,
}

impl SearchBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

fn parse_dataset(dataset: &serde_json::Value) -> Result<Vec<Index>, ExecError> {
    let mut out: Vec<Index> = Vec::new();
    let mut index = 0usize;
    for entry in dataset_array(dataset, "indices")? {
        let name = name_of(entry, index)?;
        if out.iter().any(|i| i.name == name) {
            return Err(ExecError::malformed(index, "name", format!("index `{name}` appears twice")));
        }
        let docs = entry
            .get("documents")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| ExecError::malformed(index, "documents", format!("index `{name}` has no documents array")))?;
        let mut documents = Vec::with_capacity(docs.len());
        for doc in docs {
            let obj = doc
                .as_object()
                .ok_or_else(|| ExecError::malformed(index, "", "document is not an object"))?;
            let mut fields = Vec::with_capacity(obj.len());
            for (k, v) in obj {
                let value = Value::from_json(v).ok_or_else(|| ExecError::malformed(index, k.clone(), "value is not a scalar"))?;
                let tokens = if value.is_null() { Vec::new() } else { search_tokens(&value.to_string()) };
                fields.push(Field {
                    name: k.clone(),
                    value,
                    tokens,
                });
            }
            documents.push(fields);
            index += 1;
        }
        out.push(Index { name, documents });
    }
    Ok(out)
}

/// Sum over clauses of the occurrences of each query token in the field.
/// `None` when some clause is unmatched. A clause without tokens matches
/// nothing.
fn score(doc: &[Field], q: &SearchDslQuery) -> Option<usize> {
    let mut total = 0;
    for clause in &q.must {
        let field = doc.iter().find(|f| f.name == clause.field)?;
        let wanted = search_tokens(&clause.text);
        if wanted.is_empty() {
            return None;
        }
        for w in &wanted {
            let tf = field.tokens.iter().filter(|t| *t == w).count();
            if tf == 0 {
                return None;
            }
            total += tf;
        }
    }
    Some(total)
}

fn search(indices: &[Index], q: &SearchDslQuery) -> Result<Rows, ExecError> {
    let idx = match &q.index {
        Some(name) => indices.iter().find(|i| &i.name == name),
        None if indices.len() <= 1 => indices.first(),
        None => return Err(ExecError::failed("query names no index and several exist")),
    };
    let Some(idx) = idx else {
        return Ok(Rows::default());
    };
    let mut columns: Vec<String> = Vec::new();
    for doc in &idx.documents {
        for f in doc {
            if !columns.contains(&f.name) {
                columns.push(f.name.clone());
            }
        }
    }
    let mut hits: Vec<(usize, &Vec<Field>)> =
        idx.documents.iter().filter_map(|d| score(d, q).map(|s| (s, d))).collect();
    hits.sort_by(|a, b| b.0.cmp(&a.0));
    let rows = hits
        .into_iter()
        .map(|(_, doc)| {
            columns
                .iter()
                .map(|c| doc.iter().find(|f| &f.name == c).map_or(Value::Null, |f| f.value.clone()))
                .collect()
        })
        .collect();
    Ok(Rows { columns, rows })
}

impl Backend for SearchBackend {
    fn kind(&self) -> DataSourceKind {
        DataSourceKind::Search
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        let ParsedQuery::SearchDsl(q) = query else {
            return Err(ExecError::failed("search backend only runs search queries"));
        };
        search(&self.indices.read().unwrap_or_else(|e| e.into_inner()), q)
    }

    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        let parsed = parse_dataset(dataset)?;
        let count = parsed.iter().map(|i| i.documents.len()).sum();
        *self.indices.write().unwrap_or_else(|e| e.into_inner()) = parsed;
        Ok(count)
    }

    fn state_digest(&self) -> String {
        digest_of(&*self.indices.read().unwrap_or_else(|e| e.into_inner()))
    }
}
