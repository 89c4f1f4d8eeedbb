use std::sync::RwLock;

use serde::Serialize;

use super::compare::{check_column, compare_values};
use super::{dataset_array, digest_of, name_of, Backend, ExecError, Rows};
use crate::dialect::{CompareOp, Condition, DocumentFilterQuery, ParsedQuery};
use crate::model::{DataSourceKind, Value};

/// A document flattened to dotted paths, in source key order.
type Document = Vec<(String, Value)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Collection {
    name: String,
    documents: Vec<Document>,
}

impl Collection {
    /// Union of keys over all documents, in first-seen order.
    fn columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for doc in &self.documents {
            for (k, _) in doc {
                if !out.contains(k) {
                    out.push(k.clone());
                }
            }
        }
        out
    }
}

fn lookup<'a>(doc: &'a Document, key: &str) -> &'a Value {
    doc.iter().find(|(k, _)| k == key).map_or(&Value::Null, |(_, v)| v)
}

#[derive(Debug, Default)]
pub struct DocumentBackend {
    collections: RwLock<Vec<Collection>>,
}

impl DocumentBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, index: usize, out: &mut Document) -> Result<(), ExecError> {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&path, v, index, out)?;
            }
            Ok(())
        }
        serde_json::Value::Array(_) => Err(ExecError::malformed(index, prefix, "arrays are not supported in documents")),
        scalar => {
            out.push((prefix.to_string(), Value::from_json(scalar).expect("scalar")));
            Ok(())
        }
    }
}

fn parse_dataset(dataset: &serde_json::Value) -> Result<Vec<Collection>, ExecError> {
    let mut out: Vec<Collection> = Vec::new();
    let mut index = 0usize;
    for entry in dataset_array(dataset, "collections")? {
        let name = name_of(entry, index)?;
        if out.iter().any(|c| c.name == name) {
            return Err(ExecError::malformed(index, "name", format!("collection `{name}` appears twice")));
        }
        let docs = entry
            .get("documents")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| ExecError::malformed(index, "documents", format!("collection `{name}` has no documents array")))?;
        let mut documents = Vec::with_capacity(docs.len());
        for doc in docs {
            if !doc.is_object() {
                return Err(ExecError::malformed(index, "", "document is not an object"));
            }
            let mut flat = Vec::new();
            flatten("", doc, index, &mut flat)?;
            documents.push(flat);
            index += 1;
        }
        out.push(Collection { name, documents });
    }
    Ok(out)
}

fn condition_holds(cell: &Value, condition: &Condition) -> Result<bool, ExecError> {
    Ok(match condition {
        Condition::Eq(v) => compare_values(cell, CompareOp::Eq, v)?,
        Condition::Gt(v) => compare_values(cell, CompareOp::Gt, v)?,
        Condition::Lt(v) => compare_values(cell, CompareOp::Lt, v)?,
        Condition::In(vs) => {
            let mut hit = false;
            for v in vs {
                hit |= compare_values(cell, CompareOp::Eq, v)?;
            }
            hit
        }
    })
}

fn literals(condition: &Condition) -> &[Value] {
    match condition {
        Condition::Eq(v) | Condition::Gt(v) | Condition::Lt(v) => std::slice::from_ref(v),
        Condition::In(vs) => vs,
    }
}

fn find(collections: &[Collection], q: &DocumentFilterQuery) -> Result<Rows, ExecError> {
    let Some(coll) = collections.iter().find(|c| c.name == q.collection) else {
        return Ok(Rows::default());
    };
    for (field, condition) in &q.filter {
        for literal in literals(condition) {
            check_column(field, coll.documents.iter().map(|d| lookup(d, field)), literal)?;
        }
    }
    let columns = coll.columns();
    let mut rows = Vec::new();
    'docs: for doc in &coll.documents {
        for (field, condition) in &q.filter {
            if !condition_holds(lookup(doc, field), condition)? {
                continue 'docs;
            }
        }
        rows.push(columns.iter().map(|c| lookup(doc, c).clone()).collect());
    }
    Ok(Rows { columns, rows })
}

impl Backend for DocumentBackend {
    fn kind(&self) -> DataSourceKind {
        DataSourceKind::Document
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        let ParsedQuery::DocumentFilter(q) = query else {
            return Err(ExecError::failed("document backend only runs document filters"));
        };
        find(&self.collections.read().unwrap_or_else(|e| e.into_inner()), q)
    }

    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        let parsed = parse_dataset(dataset)?;
        let count = parsed.iter().map(|c| c.documents.len()).sum();
        *self.collections.write().unwrap_or_else(|e| e.into_inner()) = parsed;
        Ok(count)
    }

    fn state_digest(&self) -> String {
        digest_of(&*self.collections.read().unwrap_or_else(|e| e.into_inner()))
    }
}
