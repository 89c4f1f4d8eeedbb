//! Random executor instances with brute-force expected results.
//!
//! Each generator builds a dataset and a query from its own small model of
//! the data and evaluates that model directly. The query text then goes
//! through the real validator and backend, so a match means parser,
//! dataset loader and executor all agree with a scan written separately.

use std::cmp::Ordering;

use polyrag_core::dialect;
use polyrag_core::exec::{in_memory_backend, ExecError};
use polyrag_core::model::{DataSourceKind, Dialect, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value as Json};

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Rows { columns: Vec<String>, rows: Vec<Vec<Json>> },
    ExecutionFailed,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: DataSourceKind,
    pub dataset: Json,
    pub query: String,
    pub expected: Expected,
}

/// Loads the dataset into a fresh backend, validates and runs the query,
/// and compares with the expectation.
pub fn check(instance: &Instance) -> Result<(), String> {
    let backend = in_memory_backend(instance.kind, None);
    backend
        .load(&instance.dataset)
        .map_err(|e| format!("dataset rejected: {e}\n{}", instance.dataset))?;
    let parsed = dialect::validate(instance.kind.dialect(), &instance.query)
        .map_err(|e| format!("query rejected: {e}\n{}", instance.query))?;
    let before = backend.state_digest();
    let got = match backend.execute(&parsed) {
        Ok(rows) => Expected::Rows {
            columns: rows.columns,
            rows: rows
                .rows
                .iter()
                .map(|r| r.iter().map(|v| serde_json::to_value(v).unwrap()).collect())
                .collect(),
        },
        Err(ExecError::ExecutionFailed(_)) => Expected::ExecutionFailed,
        Err(e) => return Err(format!("unexpected error {e}\n{}", instance.query)),
    };
    if backend.state_digest() != before {
        return Err("execution changed backend state".into());
    }
    if got != instance.expected {
        return Err(format!(
            "query: {}\ndataset: {}\nexpected: {:?}\ngot: {:?}",
            instance.query, instance.dataset, instance.expected, got
        ));
    }
    Ok(())
}

pub fn instance(kind: DataSourceKind, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        DataSourceKind::Relational => relational(&mut rng),
        DataSourceKind::Document => document(&mut rng),
        DataSourceKind::Graph => graph(&mut rng),
        DataSourceKind::Search => search(&mut rng),
    }
}

pub fn dialect_of(kind: DataSourceKind) -> Dialect {
    kind.dialect()
}

// ---------------------------------------------------------------- values

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Float,
    Str,
    Bool,
    Date,
}

const TYPES: [Ty; 5] = [Ty::Int, Ty::Float, Ty::Str, Ty::Bool, Ty::Date];
const WORDS: [&str; 5] = ["alpha", "Beta", "gamma", "O'Neil", "delta x"];
const DATES: [&str; 4] = ["2023-01-05", "2023-12-31", "2024-02-29", "2024-06-01"];

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn value_of(rng: &mut ChaCha8Rng, ty: Ty) -> Json {
    match ty {
        Ty::Int => json!(rng.random_range(-3i64..=5)),
        Ty::Float => json!(rng.random_range(-2i64..=4) as f64 + 0.5),
        Ty::Str => json!(pick(rng, &WORDS)),
        Ty::Bool => json!(rng.random_bool(0.5)),
        Ty::Date => json!(pick(rng, &DATES)),
    }
}

/// Mostly a literal of `ty`; sometimes one of another type.
fn literal_near(rng: &mut ChaCha8Rng, ty: Ty) -> Json {
    let ty = if rng.random_bool(0.1) { *pick(rng, &TYPES) } else { ty };
    value_of(rng, ty)
}

fn rank(v: &Json) -> u8 {
    match v {
        Json::Null => 0,
        Json::Bool(_) => 1,
        Json::Number(_) => 2,
        _ => 3,
    }
}

fn comparable(a: &Json, b: &Json) -> bool {
    a.is_null() || b.is_null() || rank(a) == rank(b)
}

fn cmp_json(a: &Json, b: &Json) -> Ordering {
    match (a, b) {
        (Json::Number(x), Json::Number(y)) => x.as_f64().unwrap().partial_cmp(&y.as_f64().unwrap()).unwrap(),
        (Json::String(x), Json::String(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Json::Bool(x), Json::Bool(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

const OPS: [Op; 6] = [Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge];

fn holds(cell: &Json, op: Op, lit: &Json) -> bool {
    if cell.is_null() || lit.is_null() {
        return false;
    }
    let o = cmp_json(cell, lit);
    match op {
        Op::Eq => o == Ordering::Equal,
        Op::Ne => o != Ordering::Equal,
        Op::Lt => o == Ordering::Less,
        Op::Le => o != Ordering::Greater,
        Op::Gt => o == Ordering::Greater,
        Op::Ge => o != Ordering::Less,
    }
}

fn op_text(rng: &mut ChaCha8Rng, op: Op) -> &'static str {
    match op {
        Op::Eq => "=",
        Op::Ne => {
            if rng.random_bool(0.5) {
                "<>"
            } else {
                "!="
            }
        }
        Op::Lt => "<",
        Op::Le => "<=",
        Op::Gt => ">",
        Op::Ge => ">=",
    }
}

fn sql_literal(v: &Json) -> String {
    match v {
        Json::String(s) => format!("'{}'", s.replace('\'', "''")),
        Json::Bool(true) => "TRUE".into(),
        Json::Bool(false) => "FALSE".into(),
        other => other.to_string(),
    }
}

fn cypher_literal(v: &Json) -> String {
    match v {
        Json::String(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
        other => other.to_string(),
    }
}

// ------------------------------------------------------------ relational

enum Pred {
    Cmp(usize, Op, Json),
    And(Vec<Pred>),
    Or(Vec<Pred>),
}

fn gen_pred(rng: &mut ChaCha8Rng, types: &[Ty], depth: u32) -> Pred {
    if depth == 0 || rng.random_bool(0.6) {
        let c = rng.random_range(0..types.len());
        let op = *pick(rng, &OPS);
        return Pred::Cmp(c, op, literal_near(rng, types[c]));
    }
    let n = rng.random_range(2..=3);
    let kids = (0..n).map(|_| gen_pred(rng, types, depth - 1)).collect();
    if rng.random_bool(0.5) {
        Pred::And(kids)
    } else {
        Pred::Or(kids)
    }
}

fn pred_text(rng: &mut ChaCha8Rng, p: &Pred, names: &[String]) -> String {
    match p {
        Pred::Cmp(c, op, lit) => format!("{} {} {}", names[*c], op_text(rng, *op), sql_literal(lit)),
        Pred::And(ks) | Pred::Or(ks) => {
            let joiner = if matches!(p, Pred::And(_)) { " AND " } else { " OR " };
            ks.iter()
                .map(|k| match k {
                    Pred::Cmp(..) => pred_text(rng, k, names),
                    _ => format!("({})", pred_text(rng, k, names)),
                })
                .collect::<Vec<_>>()
                .join(joiner)
        }
    }
}

fn pred_types_ok(p: &Pred, rows: &[Vec<Json>]) -> bool {
    match p {
        Pred::Cmp(c, _, lit) => rows.iter().all(|r| comparable(&r[*c], lit)),
        Pred::And(ks) | Pred::Or(ks) => ks.iter().all(|k| pred_types_ok(k, rows)),
    }
}

fn pred_eval(p: &Pred, row: &[Json]) -> bool {
    match p {
        Pred::Cmp(c, op, lit) => holds(&row[*c], *op, lit),
        Pred::And(ks) => ks.iter().all(|k| pred_eval(k, row)),
        Pred::Or(ks) => ks.iter().any(|k| pred_eval(k, row)),
    }
}

fn relational(rng: &mut ChaCha8Rng) -> Instance {
    let ncols = rng.random_range(1..=4);
    let names: Vec<String> = (0..ncols).map(|i| format!("c{i}")).collect();
    let types: Vec<Ty> = (0..ncols).map(|_| *pick(rng, &TYPES)).collect();
    let nrows = rng.random_range(0..=8);
    let rows: Vec<Vec<Json>> = (0..nrows)
        .map(|_| {
            types
                .iter()
                .map(|&t| if rng.random_bool(0.15) { Json::Null } else { value_of(rng, t) })
                .collect()
        })
        .collect();
    let dataset = json!({"tables": [{
        "name": "T",
        "columns": names,
        "rows": rows.iter().map(|r| {
            let mut m = Map::new();
            for (n, v) in names.iter().zip(r) {
                m.insert(n.clone(), v.clone());
            }
            Json::Object(m)
        }).collect::<Vec<_>>(),
    }]});

    let projection: Vec<usize> = if rng.random_bool(0.3) {
        (0..ncols).collect()
    } else {
        let k = rng.random_range(1..=ncols);
        (0..k).map(|_| rng.random_range(0..ncols)).collect()
    };
    let star = projection.len() == ncols && projection.iter().enumerate().all(|(i, &c)| i == c) && rng.random_bool(0.5);
    let pred = rng.random_bool(0.8).then(|| gen_pred(rng, &types, 2));
    let order = rng.random_bool(0.5).then(|| (rng.random_range(0..ncols), rng.random_range(0..3)));
    let limit = rng.random_bool(0.3).then(|| rng.random_range(1..=10usize));

    let mut query = format!(
        "SELECT {} FROM T",
        if star {
            "*".to_string()
        } else {
            projection.iter().map(|&c| names[c].clone()).collect::<Vec<_>>().join(", ")
        }
    );
    if let Some(p) = &pred {
        let text = pred_text(rng, p, &names);
        query.push_str(&format!(" WHERE {text}"));
    }
    if let Some((c, dir)) = order {
        query.push_str(&format!(" ORDER BY {}{}", names[c], ["", " ASC", " DESC"][dir]));
    }
    if let Some(n) = limit {
        query.push_str(&format!(" LIMIT {n}"));
    }
    if rng.random_bool(0.5) {
        query.push(';');
    }

    let expected = if pred.as_ref().is_some_and(|p| !pred_types_ok(p, &rows)) {
        Expected::ExecutionFailed
    } else {
        let mut kept: Vec<&Vec<Json>> = rows.iter().filter(|r| pred.as_ref().is_none_or(|p| pred_eval(p, r))).collect();
        if let Some((c, dir)) = order {
            if dir == 2 {
                kept.sort_by(|a, b| cmp_json(&b[c], &a[c]));
            } else {
                kept.sort_by(|a, b| cmp_json(&a[c], &b[c]));
            }
        }
        if let Some(n) = limit {
            kept.truncate(n);
        }
        Expected::Rows {
            columns: projection.iter().map(|&c| names[c].clone()).collect(),
            rows: kept.iter().map(|r| projection.iter().map(|&c| r[c].clone()).collect()).collect(),
        }
    };
    Instance {
        kind: DataSourceKind::Relational,
        dataset,
        query,
        expected,
    }
}

// -------------------------------------------------------------- document

const DOC_FIELDS: [&str; 4] = ["a", "b", "c", "m.k"];

enum Cond {
    Eq(Json),
    Gt(Json),
    Lt(Json),
    In(Vec<Json>),
}

fn document(rng: &mut ChaCha8Rng) -> Instance {
    let doc_types = [Ty::Int, Ty::Float, Ty::Str, Ty::Date];
    let types: Vec<Ty> = DOC_FIELDS.iter().map(|_| *pick(rng, &doc_types)).collect();
    let ndocs = rng.random_range(0..=10);
    // Flattened view: ordered (field, value) pairs.
    let mut flat: Vec<Vec<(String, Json)>> = Vec::new();
    let mut docs: Vec<Json> = Vec::new();
    for _ in 0..ndocs {
        let mut order: Vec<usize> = (0..DOC_FIELDS.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut obj = Map::new();
        let mut pairs = Vec::new();
        for i in order {
            if !rng.random_bool(0.85) {
                continue;
            }
            let v = if rng.random_bool(0.1) { Json::Null } else { value_of(rng, types[i]) };
            let name = DOC_FIELDS[i];
            match name.split_once('.') {
                Some((outer, inner)) => {
                    obj.insert(outer.to_string(), json!({ inner: v.clone() }));
                }
                None => {
                    obj.insert(name.to_string(), v.clone());
                }
            }
            pairs.push((name.to_string(), v));
        }
        flat.push(pairs);
        docs.push(Json::Object(obj));
    }
    let collection = if rng.random_bool(0.9) { "C" } else { "Missing" };
    let dataset = json!({"collections": [{"name": "C", "documents": docs}]});

    let mut fields: Vec<usize> = (0..DOC_FIELDS.len() + 1).collect();
    for i in (1..fields.len()).rev() {
        let j = rng.random_range(0..=i);
        fields.swap(i, j);
    }
    let nconds = [0, 1, 1, 2, 3][rng.random_range(0..5)];
    let conds: Vec<(String, Ty, Cond)> = fields[..nconds]
        .iter()
        .map(|&f| {
            let (name, ty) = if f == DOC_FIELDS.len() { ("z".to_string(), Ty::Int) } else { (DOC_FIELDS[f].to_string(), types[f]) };
            let cond = match rng.random_range(0..4) {
                0 => Cond::Eq(literal_near(rng, ty)),
                1 => Cond::Gt(literal_near(rng, ty)),
                2 => Cond::Lt(literal_near(rng, ty)),
                _ => Cond::In((0..rng.random_range(1..=3)).map(|_| literal_near(rng, ty)).collect()),
            };
            (name, ty, cond)
        })
        .collect();
    let lit = |v: &Json| v.to_string();
    let body: Vec<String> = conds
        .iter()
        .map(|(name, _, c)| {
            let rhs = match c {
                Cond::Eq(v) => lit(v),
                Cond::Gt(v) => format!("{{ \"$gt\": {} }}", lit(v)),
                Cond::Lt(v) => format!("{{ \"$lt\": {} }}", lit(v)),
                Cond::In(vs) => format!("{{ \"$in\": [{}] }}", vs.iter().map(lit).collect::<Vec<_>>().join(", ")),
            };
            format!("\"{name}\": {rhs}")
        })
        .collect();
    let query = format!("db.{collection}.find({{ {} }})", body.join(", "));

    let get = |doc: &[(String, Json)], key: &str| doc.iter().find(|(k, _)| k == key).map_or(Json::Null, |(_, v)| v.clone());
    let expected = if collection != "C" {
        Expected::Rows {
            columns: Vec::new(),
            rows: Vec::new(),
        }
    } else {
        let literals = |c: &Cond| -> Vec<Json> {
            match c {
                Cond::Eq(v) | Cond::Gt(v) | Cond::Lt(v) => vec![v.clone()],
                Cond::In(vs) => vs.clone(),
            }
        };
        let bad = conds
            .iter()
            .any(|(name, _, c)| literals(c).iter().any(|l| flat.iter().any(|d| !comparable(&get(d, name), l))));
        if bad {
            Expected::ExecutionFailed
        } else {
            let mut columns: Vec<String> = Vec::new();
            for d in &flat {
                for (k, _) in d {
                    if !columns.contains(k) {
                        columns.push(k.clone());
                    }
                }
            }
            let rows = flat
                .iter()
                .filter(|d| {
                    conds.iter().all(|(name, _, c)| {
                        let cell = get(d, name);
                        match c {
                            Cond::Eq(v) => holds(&cell, Op::Eq, v),
                            Cond::Gt(v) => holds(&cell, Op::Gt, v),
                            Cond::Lt(v) => holds(&cell, Op::Lt, v),
                            Cond::In(vs) => vs.iter().any(|v| holds(&cell, Op::Eq, v)),
                        }
                    })
                })
                .map(|d| columns.iter().map(|c| get(d, c)).collect())
                .collect();
            Expected::Rows { columns, rows }
        }
    };
    Instance {
        kind: DataSourceKind::Document,
        dataset,
        query,
        expected,
    }
}

// ----------------------------------------------------------------- graph

struct GNode {
    label: &'static str,
    name: String,
    age: Option<i64>,
}

struct GPattern {
    var: &'static str,
    label: Option<&'static str>,
    name: Option<String>,
}

fn graph(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(0..=8);
    let nodes: Vec<GNode> = (0..n)
        .map(|i| GNode {
            label: *pick(rng, &["A", "B"]),
            name: format!("n{i}"),
            age: rng.random_bool(0.7).then(|| rng.random_range(20..=25)),
        })
        .collect();
    let nrels = if n == 0 { 0 } else { rng.random_range(0..=16) };
    let rels: Vec<(&'static str, usize, usize)> = (0..nrels)
        .map(|_| (*pick(rng, &["R", "S"]), rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let dataset = json!({
        "nodes": nodes.iter().enumerate().map(|(i, nd)| {
            let mut props = Map::new();
            props.insert("name".into(), json!(nd.name));
            if let Some(a) = nd.age {
                props.insert("age".into(), json!(a));
            }
            json!({"id": format!("id{i}"), "label": nd.label, "properties": props})
        }).collect::<Vec<_>>(),
        "relationships": rels.iter().map(|(t, f, to)| json!({"type": t, "from": format!("id{f}"), "to": format!("id{to}")})).collect::<Vec<_>>(),
    });

    let pattern = |var: &'static str, rng: &mut ChaCha8Rng| GPattern {
        var,
        label: rng.random_bool(0.6).then(|| *pick(rng, &["A", "B"])),
        name: (n > 0 && rng.random_bool(0.3)).then(|| format!("n{}", rng.random_range(0..n + 1))),
    };
    let head = pattern("x", rng);
    let hop = rng
        .random_bool(0.7)
        .then(|| (*pick(rng, &["R", "S"]), rng.random_range(0..3u8), pattern("y", rng)));
    let vars: Vec<&GPattern> = std::iter::once(&head).chain(hop.as_ref().map(|h| &h.2)).collect();
    let wheres: Vec<(usize, Op, Json)> = (0..[0, 0, 1, 1, 2][rng.random_range(0..5)])
        .map(|_| {
            let v = rng.random_range(0..vars.len());
            let lit = if rng.random_bool(0.1) { json!("old") } else { json!(rng.random_range(20..=25)) };
            (v, *pick(rng, &OPS), lit)
        })
        .collect();
    let returns: Vec<(usize, &'static str)> = (0..rng.random_range(1..=3))
        .map(|_| (rng.random_range(0..vars.len()), *pick(rng, &["name", "age"])))
        .collect();

    let node_text = |p: &GPattern| {
        let mut s = format!("({}", p.var);
        if let Some(l) = p.label {
            s.push_str(&format!(":{l}"));
        }
        if let Some(name) = &p.name {
            s.push_str(&format!(" {{name: {}}}", cypher_literal(&json!(name))));
        }
        s.push(')');
        s
    };
    let mut query = format!("MATCH {}", node_text(&head));
    if let Some((t, dir, target)) = &hop {
        let arrow = match dir {
            0 => format!("-[:{t}]->"),
            1 => format!("<-[:{t}]-"),
            _ => format!("-[:{t}]-"),
        };
        query.push_str(&format!("{arrow}{}", node_text(target)));
    }
    if !wheres.is_empty() {
        let conds: Vec<String> = wheres
            .iter()
            .map(|(v, op, lit)| format!("{}.age {} {}", vars[*v].var, op_text(rng, *op), cypher_literal(lit)))
            .collect();
        query.push_str(&format!(" WHERE {}", conds.join(" AND ")));
    }
    query.push_str(&format!(
        " RETURN {}",
        returns.iter().map(|(v, p)| format!("{}.{p}", vars[*v].var)).collect::<Vec<_>>().join(", ")
    ));

    let age = |i: usize| nodes[i].age.map_or(Json::Null, |a| json!(a));
    let label_ok = |p: &GPattern, i: usize| p.label.is_none_or(|l| l == nodes[i].label);
    let node_ok = |p: &GPattern, i: usize| label_ok(p, i) && p.name.as_ref().is_none_or(|nm| *nm == nodes[i].name);
    let bad = wheres
        .iter()
        .any(|(v, _, lit)| (0..n).any(|i| label_ok(vars[*v], i) && !comparable(&age(i), lit)));
    let expected = if bad {
        Expected::ExecutionFailed
    } else {
        let mut bindings: Vec<Vec<usize>> = Vec::new();
        for h in 0..n {
            if !node_ok(&head, h) {
                continue;
            }
            match &hop {
                None => bindings.push(vec![h]),
                Some((t, dir, target)) => {
                    for &(rt, f, to) in &rels {
                        if rt != *t {
                            continue;
                        }
                        let other = match dir {
                            0 => (f == h).then_some(to),
                            1 => (to == h).then_some(f),
                            _ => {
                                if f == h {
                                    Some(to)
                                } else if to == h {
                                    Some(f)
                                } else {
                                    None
                                }
                            }
                        };
                        if let Some(o) = other.filter(|&o| node_ok(target, o)) {
                            bindings.push(vec![h, o]);
                        }
                    }
                }
            }
        }
        let prop = |i: usize, p: &str| if p == "name" { json!(nodes[i].name) } else { age(i) };
        let rows = bindings
            .iter()
            .filter(|b| wheres.iter().all(|(v, op, lit)| holds(&age(b[*v]), *op, lit)))
            .map(|b| returns.iter().map(|(v, p)| prop(b[*v], p)).collect())
            .collect();
        Expected::Rows {
            columns: returns.iter().map(|(v, p)| format!("{}.{p}", vars[*v].var)).collect(),
            rows,
        }
    };
    Instance {
        kind: DataSourceKind::Graph,
        dataset,
        query,
        expected,
    }
}

// ---------------------------------------------------------------- search

const VOCAB: [&str; 8] = ["disk", "full", "MySQL", "error", "slow", "Neo4j", "query", "time2out"];
const SEPARATORS: [&str; 4] = [" ", ", ", "-", "  "];

fn words_text(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str(pick(rng, &SEPARATORS));
        }
        let w = *pick(rng, &VOCAB);
        out.push_str(&if rng.random_bool(0.3) { w.to_uppercase() } else { w.to_string() });
    }
    out
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn search(rng: &mut ChaCha8Rng) -> Instance {
    let fields = ["title", "body"];
    let ndocs = rng.random_range(0..=8);
    let docs: Vec<Vec<(String, String)>> = (0..ndocs)
        .map(|i| {
            let mut d = vec![("id".to_string(), format!("d{i}"))];
            for f in fields {
                if rng.random_bool(0.85) {
                    d.push((f.to_string(), words_text(rng, 2, 7)));
                }
            }
            d
        })
        .collect();
    let dataset = json!({"indices": [{"name": "I", "documents": docs.iter().map(|d| {
        let mut m = Map::new();
        for (k, v) in d {
            m.insert(k.clone(), json!(v));
        }
        Json::Object(m)
    }).collect::<Vec<_>>()}]});

    let clauses: Vec<(String, String)> = (0..[1, 1, 2][rng.random_range(0..3)])
        .map(|_| {
            let hi = if rng.random_bool(0.3) { 2 } else { 1 };
            (pick(rng, &fields).to_string(), words_text(rng, 1, hi))
        })
        .collect();
    let mut fields_used: Vec<&str> = clauses.iter().map(|(f, _)| f.as_str()).collect();
    fields_used.dedup();
    let must: Vec<String> = clauses
        .iter()
        .map(|(f, t)| format!("{{ \"match\": {{ \"{f}\": {} }} }}", json!(t)))
        .collect();
    let query = format!("{{ \"query\": {{ \"bool\": {{ \"must\": [ {} ] }} }} }}", must.join(", "));

    let mut scored: Vec<(usize, usize)> = Vec::new();
    for (pos, d) in docs.iter().enumerate() {
        let mut total = 0;
        let mut ok = true;
        for (f, text) in &clauses {
            let have = d.iter().find(|(k, _)| k == f).map(|(_, v)| lower_tokens(v));
            let Some(have) = have else {
                ok = false;
                break;
            };
            for w in lower_tokens(text) {
                let tf = have.iter().filter(|h| **h == w).count();
                if tf == 0 {
                    ok = false;
                }
                total += tf;
            }
        }
        if ok {
            scored.push((total, pos));
        }
    }
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut columns: Vec<String> = Vec::new();
    for d in &docs {
        for (k, _) in d {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
    }
    let rows = scored
        .iter()
        .map(|&(_, pos)| {
            columns
                .iter()
                .map(|c| docs[pos].iter().find(|(k, _)| k == c).map_or(Json::Null, |(_, v)| json!(v)))
                .collect()
        })
        .collect();
    Instance {
        kind: DataSourceKind::Search,
        dataset,
        query,
        expected: Expected::Rows { columns, rows },
    }
}

/// Converts a value the way backends report it, for callers holding
/// `Value`s.
pub fn json_of(v: &Value) -> Json {
    serde_json::to_value(v).unwrap()
}
