use std::sync::RwLock;

use serde::Serialize;

use super::compare::{check_column, compare_values};
use super::{dataset_array, digest_of, Backend, ExecError, Rows};
use crate::dialect::{CompareOp, Direction, GraphPatternQuery, NodePattern, ParsedQuery};
use crate::model::{DataSourceKind, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Node {
    id: String,
    label: String,
    properties: Vec<(String, Value)>,
}

impl Node {
    fn property(&self, name: &str) -> &Value {
        self.properties.iter().find(|(k, _)| k == name).map_or(&Value::Null, |(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Relationship {
    rel_type: String,
    from: usize,
    to: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
struct Graph {
    nodes: Vec<Node>,
    relationships: Vec<Relationship>,
}

/// Labelled property graph answering single-hop patterns.
#[derive(Debug, Default)]
pub struct GraphBackend {
    graph: RwLock<Graph>,
}

impl GraphBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

fn str_field(entry: &serde_json::Value, key: &str, index: usize) -> Result<String, ExecError> {
    entry
        .get(key)
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ExecError::malformed(index, key, "missing or not a string"))
}

fn parse_dataset(dataset: &serde_json::Value) -> Result<Graph, ExecError> {
    let mut graph = Graph::default();
    let nodes = dataset_array(dataset, "nodes")?;
    for (index, entry) in nodes.iter().enumerate() {
        let id = str_field(entry, "id", index)?;
        if graph.nodes.iter().any(|n| n.id == id) {
            return Err(ExecError::malformed(index, "id", format!("duplicate node id `{id}`")));
        }
        let label = str_field(entry, "label", index)?;
        let mut properties = Vec::new();
        match entry.get("properties") {
            None => {}
            Some(serde_json::Value::Object(map)) => {
                for (k, v) in map {
                    let value = Value::from_json(v)
                        .ok_or_else(|| ExecError::malformed(index, format!("properties.{k}"), "value is not a scalar"))?;
                    properties.push((k.clone(), value));
                }
            }
            Some(_) => return Err(ExecError::malformed(index, "properties", "not an object")),
        }
        graph.nodes.push(Node { id, label, properties });
    }
    let rels = dataset.get("relationships").and_then(serde_json::Value::as_array);
    for (j, entry) in rels.into_iter().flatten().enumerate() {
        let index = nodes.len() + j;
        let rel_type = str_field(entry, "type", index)?;
        let endpoint = |key: &str| -> Result<usize, ExecError> {
            let id = str_field(entry, key, index)?;
            graph
                .nodes
                .iter()
                .position(|n| n.id == id)
                .ok_or_else(|| ExecError::malformed(index, key, format!("unknown node id `{id}`")))
        };
        let (from, to) = (endpoint("from")?, endpoint("to")?);
        graph.relationships.push(Relationship { rel_type, from, to });
    }
    Ok(graph)
}

fn label_matches(pattern: &NodePattern, node: &Node) -> bool {
    pattern.label.as_ref().is_none_or(|l| *l == node.label)
}

fn node_matches(pattern: &NodePattern, node: &Node) -> Result<bool, ExecError> {
    if !label_matches(pattern, node) {
        return Ok(false);
    }
    for (k, v) in &pattern.properties {
        if !compare_values(node.property(k), CompareOp::Eq, v)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn candidates<'a>(graph: &'a Graph, p: &'a NodePattern) -> impl Iterator<Item = &'a Node> + 'a {
    graph.nodes.iter().filter(move |n| label_matches(p, n))
}

fn check_types(graph: &Graph, q: &GraphPatternQuery) -> Result<(), ExecError> {
    let patterns = std::iter::once(&q.head).chain(q.hop.as_ref().map(|h| &h.target));
    for p in patterns {
        for (k, v) in &p.properties {
            check_column(&format!("{}.{k}", p.variable), candidates(graph, p).map(|n| n.property(k)), v)?;
        }
    }
    for w in &q.where_clause {
        let p = q
            .node(&w.target.variable)
            .ok_or_else(|| ExecError::failed(format!("unbound variable `{}`", w.target.variable)))?;
        check_column(
            &format!("{}.{}", w.target.variable, w.target.property),
            candidates(graph, p).map(|n| n.property(&w.target.property)),
            &w.value,
        )?;
    }
    Ok(())
}

/// Every (head, target) binding in head-then-relationship insertion order.
fn bindings(graph: &Graph, q: &GraphPatternQuery) -> Result<Vec<(usize, Option<usize>)>, ExecError> {
    let mut out = Vec::new();
    for (h, head) in graph.nodes.iter().enumerate() {
        if !node_matches(&q.head, head)? {
            continue;
        }
        let Some(hop) = &q.hop else {
            out.push((h, None));
            continue;
        };
        for rel in graph.relationships.iter().filter(|r| r.rel_type == hop.rel_type) {
            let other = match hop.direction {
                Direction::Outgoing => (rel.from == h).then_some(rel.to),
                Direction::Incoming => (rel.to == h).then_some(rel.from),
                Direction::Either if rel.from == h => Some(rel.to),
                Direction::Either => (rel.to == h).then_some(rel.from),
            };
            if let Some(t) = other {
                if node_matches(&hop.target, &graph.nodes[t])? {
                    out.push((h, Some(t)));
                }
            }
        }
    }
    Ok(out)
}

fn run(graph: &Graph, q: &GraphPatternQuery) -> Result<Rows, ExecError> {
    check_types(graph, q)?;
    let columns: Vec<String> = q.returns.iter().map(|r| format!("{}.{}", r.variable, r.property)).collect();
    let bound = |var: &str, (h, t): (usize, Option<usize>)| -> &Node {
        if var == q.head.variable {
            &graph.nodes[h]
        } else {
            &graph.nodes[t.expect("target bound when a hop exists")]
        }
    };
    let mut rows = Vec::new();
    'bindings: for b in bindings(graph, q)? {
        for w in &q.where_clause {
            if !compare_values(bound(&w.target.variable, b).property(&w.target.property), w.op, &w.value)? {
                continue 'bindings;
            }
        }
        rows.push(
            q.returns
                .iter()
                .map(|r| bound(&r.variable, b).property(&r.property).clone())
                .collect(),
        );
    }
    Ok(Rows { columns, rows })
}

impl Backend for GraphBackend {
    fn kind(&self) -> DataSourceKind {
        DataSourceKind::Graph
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        let ParsedQuery::GraphPattern(q) = query else {
            return Err(ExecError::failed("graph backend only runs graph patterns"));
        };
        run(&self.graph.read().unwrap_or_else(|e| e.into_inner()), q)
    }

    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        let parsed = parse_dataset(dataset)?;
        let count = parsed.nodes.len() + parsed.relationships.len();
        *self.graph.write().unwrap_or_else(|e| e.into_inner()) = parsed;
        Ok(count)
    }

    fn state_digest(&self) -> String {
        digest_of(&*self.graph.read().unwrap_or_else(|e| e.into_inner()))
    }
}
