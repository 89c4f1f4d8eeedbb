//! `db.<collection>.find(<filter>)` with equality, `$gt`, `$lt` and `$in`.

use serde::Serialize;

use super::json::{quote, JsonKind, Member, Reader, RELAXED};
use super::lexer::{tokenize, Cursor, Tok, Token};
use super::{normalize_query_whitespace, render_float, ValidationError};
use crate::model::Value;

const WRITE_METHODS: &[&str] = &[
    "insert",
    "insertOne",
    "insertMany",
    "update",
    "updateOne",
    "updateMany",
    "replaceOne",
    "delete",
    "deleteOne",
    "deleteMany",
    "remove",
    "drop",
    "dropDatabase",
    "dropIndex",
    "dropIndexes",
    "findOneAndUpdate",
    "findOneAndDelete",
    "findOneAndReplace",
    "findAndModify",
    "bulkWrite",
    "save",
    "createIndex",
    "renameCollection",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentFilterQuery {
    pub collection: String,
    /// Field conditions in source order; all must hold.
    pub filter: Vec<(String, Condition)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Condition {
    Eq(Value),
    Gt(Value),
    Lt(Value),
    In(Vec<Value>),
}

pub fn validate_document_filter(text: &str) -> Result<DocumentFilterQuery, ValidationError> {
    let norm = normalize_query_whitespace(text);
    let tokens = tokenize(&norm, RELAXED)?;
    write_method_gate(&tokens)?;
    let mut cur = Cursor::new(&tokens, norm.len());

    if !matches!(cur.peek(), Some(Token { tok: Tok::Ident(w), .. }) if w == "db") {
        return Err(cur.error("`db`"));
    }
    cur.next();
    cur.expect_punct(".")?;
    let collection = match cur.next() {
        Some(Token {
            tok: Tok::Ident(name), ..
        }) if !name.starts_with('$') => name.clone(),
        other => {
            return Err(ValidationError::parse(
                other.map_or(norm.len(), |t| t.start),
                "a collection name",
                super::lexer::describe(other),
            ))
        }
    };
    cur.expect_punct(".")?;
    match cur.peek() {
        Some(Token {
            tok: Tok::Ident(m), ..
        }) if m == "find" => {
            cur.next();
        }
        Some(Token {
            tok: Tok::Ident(m),
            start,
            ..
        }) => {
            return Err(ValidationError::ReadOnlyViolation {
                keyword: m.clone(),
                position: *start,
            })
        }
        _ => return Err(cur.error("a method name")),
    }
    cur.expect_punct("(")?;
    let filter = if cur.is_punct(")") {
        Vec::new()
    } else {
        let mut reader = Reader {
            input: &norm,
            relaxed: true,
        };
        let obj_start = cur.offset();
        let value = reader.value(&mut cur)?;
        match value.kind {
            JsonKind::Object(members) => members.into_iter().map(condition).collect::<Result<_, _>>()?,
            _ => return Err(ValidationError::parse(obj_start, "a filter object", "a non-object value")),
        }
    };
    cur.expect_punct(")")?;
    cur.eat_punct(";");
    if !cur.at_end() {
        return Err(cur.error("end of statement"));
    }
    Ok(DocumentFilterQuery { collection, filter })
}

/// Any write method reached through `.` fails the gate, wherever it appears.
fn write_method_gate(tokens: &[Token]) -> Result<(), ValidationError> {
    for pair in tokens.windows(2) {
        if let (Tok::Punct("."), Tok::Ident(m)) = (&pair[0].tok, &pair[1].tok) {
            if WRITE_METHODS.contains(&m.as_str()) {
                return Err(ValidationError::ReadOnlyViolation {
                    keyword: m.clone(),
                    position: pair[1].start,
                });
            }
        }
    }
    Ok(())
}

fn condition(member: Member) -> Result<(String, Condition), ValidationError> {
    if member.key.starts_with('$') {
        return Err(ValidationError::parse(member.key_pos, "a field name", format!("operator {}", member.key)));
    }
    if member.key.is_empty() {
        return Err(ValidationError::parse(member.key_pos, "a field name", "empty key"));
    }
    let cond = match member.value.kind {
        JsonKind::Scalar(v) => Condition::Eq(v),
        JsonKind::Array(_) => {
            return Err(ValidationError::parse(member.value.start, "a literal or operator object", "an array"))
        }
        JsonKind::Object(mut ops) => {
            if ops.len() != 1 {
                return Err(ValidationError::parse(
                    member.value.start,
                    "exactly one of $gt, $lt, $in",
                    format!("{} operators", ops.len()),
                ));
            }
            let op = ops.pop().expect("one operator");
            match (op.key.as_str(), op.value.kind) {
                ("$gt", JsonKind::Scalar(v)) => Condition::Gt(v),
                ("$lt", JsonKind::Scalar(v)) => Condition::Lt(v),
                ("$in", JsonKind::Array(items)) => {
                    let mut values = Vec::with_capacity(items.len());
                    for item in items {
                        match item.kind {
                            JsonKind::Scalar(v) => values.push(v),
                            _ => return Err(ValidationError::parse(item.start, "a literal", "a nested value")),
                        }
                    }
                    Condition::In(values)
                }
                ("$gt" | "$lt" | "$in", _) => {
                    return Err(ValidationError::parse(op.value.start, "an operand matching the operator", "a mismatched value"))
                }
                (other, _) => {
                    return Err(ValidationError::parse(op.key_pos, "one of $gt, $lt, $in", format!("`{other}`")))
                }
            }
        }
    };
    Ok((member.key, cond))
}

fn render_literal(v: &Value) -> String {
    match v {
        Value::Str(s) | Value::Date(s) => quote(s),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => render_float(*x),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".to_string(),
    }
}

impl DocumentFilterQuery {
    pub fn render(&self) -> String {
        if self.filter.is_empty() {
            return format!("db.{}.find({{}});", self.collection);
        }
        let fields: Vec<String> = self
            .filter
            .iter()
            .map(|(field, cond)| {
                let rhs = match cond {
                    Condition::Eq(v) => render_literal(v),
                    Condition::Gt(v) => format!("{{ \"$gt\": {} }}", render_literal(v)),
                    Condition::Lt(v) => format!("{{ \"$lt\": {} }}", render_literal(v)),
                    Condition::In(vs) => {
                        let items: Vec<String> = vs.iter().map(render_literal).collect();
                        format!("{{ \"$in\": [{}] }}", items.join(", "))
                    }
                };
                format!("{}: {}", quote(field), rhs)
            })
            .collect();
        format!("db.{}.find({{ {} }});", self.collection, fields.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_pairs_in_order() {
        let text = r#"db.Projects.find({ "assigned_to": "Saba Attar", "status": "completed" });"#;
        let q = validate_document_filter(text).unwrap();
        assert_eq!(q.collection, "Projects");
        assert_eq!(
            q.filter,
            vec![
                ("assigned_to".into(), Condition::Eq(Value::Str("Saba Attar".into()))),
                ("status".into(), Condition::Eq(Value::Str("completed".into()))),
            ]
        );
        assert_eq!(q.render(), text);
    }

    #[test]
    fn empty_filter_matches_all() {
        for text in ["db.Projects.find({})", "db.Projects.find()"] {
            let q = validate_document_filter(text).unwrap();
            assert!(q.filter.is_empty());
        }
    }

    #[test]
    fn operators() {
        let q = validate_document_filter("db.P.find({ project_id: { $gt: 101 }, status: { '$in': ['a', 'b'] } })").unwrap();
        assert_eq!(q.filter[0].1, Condition::Gt(Value::Int(101)));
        assert_eq!(q.filter[1].1, Condition::In(vec![Value::Str("a".into()), Value::Str("b".into())]));
        assert_eq!(validate_document_filter(&q.render()).unwrap(), q);
        assert!(validate_document_filter("db.P.find({ a: { $ne: 1 } })").is_err());
        assert!(validate_document_filter("db.P.find({ a: { $gt: 1, $lt: 5 } })").is_err());
        assert!(validate_document_filter("db.P.find({ $where: 'x' })").is_err());
    }

    #[test]
    fn writes_are_rejected() {
        for text in [
            "db.Projects.deleteMany({ \"status\": \"completed\" })",
            "db.Projects.updateOne({}, { $set: { a: 1 } })",
            "db.Projects.find({}).remove()",
            "db.Projects.aggregate([])",
        ] {
            assert!(validate_document_filter(text).unwrap_err().is_read_only_violation(), "{text}");
        }
    }
}
