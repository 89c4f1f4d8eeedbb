//! Single-hop `MATCH ... [WHERE ...] RETURN ...` patterns.

use serde::Serialize;

use super::lexer::{describe, tokenize, Cursor, LexOptions, Tok, Token};
use super::{normalize_query_whitespace, number_value, render_float, CompareOp, ValidationError};
use crate::model::Value;

const LEX: LexOptions = LexOptions {
    doubled_quotes: false,
    backslash_escapes: true,
    dollar_idents: false,
};

const WRITE_CLAUSES: &[&str] = &["CREATE", "DELETE", "DETACH", "SET", "MERGE", "REMOVE", "DROP"];

const UNSUPPORTED_CLAUSES: &[&str] = &[
    "OPTIONAL", "WITH", "UNWIND", "ORDER", "SKIP", "LIMIT", "DISTINCT", "UNION", "CALL", "FOREACH", "LOAD", "OR",
    "XOR", "NOT", "EXISTS", "AS",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodePattern {
    pub variable: String,
    pub label: Option<String>,
    pub properties: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// `(head)-[:T]->(target)`
    Outgoing,
    /// `(head)<-[:T]-(target)`
    Incoming,
    /// `(head)-[:T]-(target)`
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hop {
    pub rel_type: String,
    pub direction: Direction,
    pub target: NodePattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PropertyRef {
    pub variable: String,
    pub property: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhereComparison {
    pub target: PropertyRef,
    pub op: CompareOp,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphPatternQuery {
    pub head: NodePattern,
    pub hop: Option<Hop>,
    /// Conjunction; empty when there is no `WHERE`.
    pub where_clause: Vec<WhereComparison>,
    pub returns: Vec<PropertyRef>,
}

impl GraphPatternQuery {
    pub fn node(&self, variable: &str) -> Option<&NodePattern> {
        std::iter::once(&self.head)
            .chain(self.hop.as_ref().map(|h| &h.target))
            .find(|n| n.variable == variable)
    }
}

pub fn validate_graph_pattern(text: &str) -> Result<GraphPatternQuery, ValidationError> {
    let norm = normalize_query_whitespace(text);
    let tokens = tokenize(&norm, LEX)?;
    write_gate(&tokens)?;
    let mut p = Parser {
        cur: Cursor::new(&tokens, norm.len()),
    };
    p.query()
}

fn write_gate(tokens: &[Token]) -> Result<(), ValidationError> {
    for (i, t) in tokens.iter().enumerate() {
        let Tok::Ident(word) = &t.tok else { continue };
        let after_dot = i > 0 && tokens[i - 1].tok == Tok::Punct(".");
        if !after_dot && WRITE_CLAUSES.iter().any(|k| k.eq_ignore_ascii_case(word)) {
            return Err(ValidationError::ReadOnlyViolation {
                keyword: word.to_ascii_uppercase(),
                position: t.start,
            });
        }
    }
    Ok(())
}

struct Parser<'a> {
    cur: Cursor<'a>,
}

impl Parser<'_> {
    /// A parse error, upgraded to `UnsupportedPattern` when the offending
    /// token is a clause outside the supported subset.
    fn fail(&self, expected: &str) -> ValidationError {
        if let Some(Token {
            tok: Tok::Ident(w),
            start,
            ..
        }) = self.cur.peek()
        {
            if UNSUPPORTED_CLAUSES.iter().any(|k| k.eq_ignore_ascii_case(w)) {
                return ValidationError::UnsupportedPattern {
                    position: *start,
                    detail: format!("`{}` is outside the supported subset", w.to_ascii_uppercase()),
                };
            }
        }
        self.cur.error(expected)
    }

    fn unsupported(&self, detail: &str) -> ValidationError {
        ValidationError::UnsupportedPattern {
            position: self.cur.offset(),
            detail: detail.to_string(),
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ValidationError> {
        if self.cur.eat_punct(p) {
            Ok(())
        } else {
            Err(self.fail(&format!("`{p}`")))
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ValidationError> {
        match self.cur.peek() {
            Some(Token {
                tok: Tok::Ident(name), ..
            }) if !is_keyword(name) => {
                self.cur.next();
                Ok(name.clone())
            }
            _ => Err(self.fail(what)),
        }
    }

    fn query(&mut self) -> Result<GraphPatternQuery, ValidationError> {
        if !self.cur.eat_keyword("MATCH") {
            return Err(self.fail("MATCH"));
        }
        let head = self.node()?;
        let hop = self.hop()?;
        if let Some(h) = &hop {
            if h.target.variable == head.variable {
                return Err(ValidationError::UnsupportedPattern {
                    position: 0,
                    detail: format!("variable `{}` bound twice", head.variable),
                });
            }
        }
        if self.cur.is_punct("-") || self.cur.is_punct("<-") || self.cur.is_punct("->") {
            return Err(self.unsupported("patterns with more than one relationship"));
        }
        if self.cur.is_punct(",") {
            return Err(self.unsupported("comma-separated patterns"));
        }
        let bound: Vec<&str> = std::iter::once(head.variable.as_str())
            .chain(hop.as_ref().map(|h| h.target.variable.as_str()))
            .collect();

        let mut where_clause = Vec::new();
        if self.cur.eat_keyword("WHERE") {
            loop {
                where_clause.push(self.comparison(&bound)?);
                if !self.cur.eat_keyword("AND") {
                    break;
                }
            }
        }
        if !self.cur.eat_keyword("RETURN") {
            return Err(self.fail("RETURN"));
        }
        let mut returns = vec![self.property_ref(&bound)?];
        while self.cur.eat_punct(",") {
            returns.push(self.property_ref(&bound)?);
        }
        self.cur.eat_punct(";");
        if !self.cur.at_end() {
            return Err(self.fail("end of statement"));
        }
        Ok(GraphPatternQuery {
            head,
            hop,
            where_clause,
            returns,
        })
    }

    fn node(&mut self) -> Result<NodePattern, ValidationError> {
        self.expect("(")?;
        let variable = self.name("a node variable")?;
        let label = if self.cur.eat_punct(":") {
            Some(self.name("a node label")?)
        } else {
            None
        };
        let mut properties: Vec<(String, Value)> = Vec::new();
        if self.cur.eat_punct("{") {
            loop {
                let at = self.cur.offset();
                let key = self.name("a property name")?;
                if properties.iter().any(|(k, _)| *k == key) {
                    return Err(ValidationError::parse(at, "a unique property name", format!("duplicate `{key}`")));
                }
                self.expect(":")?;
                let value = self.literal()?;
                properties.push((key, value));
                if self.cur.eat_punct("}") {
                    break;
                }
                self.expect(",")?;
            }
        }
        self.expect(")")?;
        Ok(NodePattern {
            variable,
            label,
            properties,
        })
    }

    fn hop(&mut self) -> Result<Option<Hop>, ValidationError> {
        let incoming = if self.cur.eat_punct("<-") {
            true
        } else if self.cur.eat_punct("-") {
            false
        } else {
            return Ok(None);
        };
        self.expect("[")?;
        if !self.cur.is_punct(":") {
            if matches!(self.cur.peek(), Some(Token { tok: Tok::Ident(_), .. })) {
                return Err(self.unsupported("relationship variables"));
            }
            return Err(self.fail("`:`"));
        }
        self.cur.next();
        let rel_type = self.name("a relationship type")?;
        if self.cur.is_punct("*") {
            return Err(self.unsupported("variable-length relationships"));
        }
        if self.cur.is_punct("{") {
            return Err(self.unsupported("relationship property maps"));
        }
        self.expect("]")?;
        let direction = if incoming {
            self.expect("-")?;
            Direction::Incoming
        } else if self.cur.eat_punct("->") {
            Direction::Outgoing
        } else {
            self.expect("-")?;
            Direction::Either
        };
        let target = self.node()?;
        Ok(Some(Hop {
            rel_type,
            direction,
            target,
        }))
    }

    fn property_ref(&mut self, bound: &[&str]) -> Result<PropertyRef, ValidationError> {
        let at = self.cur.offset();
        let variable = self.name("a variable")?;
        if !bound.contains(&variable.as_str()) {
            return Err(ValidationError::parse(at, "a bound variable", format!("`{variable}`")));
        }
        self.expect(".")?;
        let property = match self.cur.next() {
            Some(Token {
                tok: Tok::Ident(name), ..
            }) => name.clone(),
            other => {
                return Err(ValidationError::parse(
                    other.map_or(at, |t| t.start),
                    "a property name",
                    describe(other),
                ))
            }
        };
        Ok(PropertyRef { variable, property })
    }

    fn comparison(&mut self, bound: &[&str]) -> Result<WhereComparison, ValidationError> {
        let target = self.property_ref(bound)?;
        let at = self.cur.offset();
        let (op, negate) = match self.cur.peek().map(|t| &t.tok) {
            // `a.b <-1` lexes as an arrow; read it as `<` and a signed literal.
            Some(Tok::Punct("<-")) => (CompareOp::Lt, true),
            Some(Tok::Punct(p)) => match CompareOp::from_punct(p) {
                Some(op) => (op, false),
                None => return Err(self.fail("a comparison operator")),
            },
            _ => return Err(self.fail("a comparison operator")),
        };
        self.cur.next();
        let value = if negate {
            match self.cur.next() {
                Some(Token {
                    tok: Tok::Number(raw), ..
                }) => number_value(raw, true, at)?,
                other => return Err(ValidationError::parse(at, "a number", describe(other))),
            }
        } else {
            self.literal()?
        };
        Ok(WhereComparison { target, op, value })
    }

    fn literal(&mut self) -> Result<Value, ValidationError> {
        let at = self.cur.offset();
        let negative = self.cur.eat_punct("-");
        let value = match self.cur.peek().map(|t| &t.tok) {
            Some(Tok::Number(raw)) => number_value(raw, negative, at)?,
            Some(Tok::Str(s)) if !negative => Value::Str(s.clone()),
            Some(Tok::Ident(w)) if !negative && w.eq_ignore_ascii_case("true") => Value::Bool(true),
            Some(Tok::Ident(w)) if !negative && w.eq_ignore_ascii_case("false") => Value::Bool(false),
            _ => return Err(self.fail("a literal")),
        };
        self.cur.next();
        Ok(value)
    }
}

fn is_keyword(word: &str) -> bool {
    ["MATCH", "WHERE", "RETURN", "AND"]
        .iter()
        .chain(UNSUPPORTED_CLAUSES)
        .any(|k| k.eq_ignore_ascii_case(word))
}

fn render_literal(v: &Value) -> String {
    match v {
        Value::Str(s) | Value::Date(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => render_float(*x),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".to_string(),
    }
}

impl NodePattern {
    fn render(&self) -> String {
        let mut out = format!("({}", self.variable);
        if let Some(label) = &self.label {
            out.push(':');
            out.push_str(label);
        }
        if !self.properties.is_empty() {
            let props: Vec<String> = self
                .properties
                .iter()
                .map(|(k, v)| format!("{k}: {}", render_literal(v)))
                .collect();
            out.push_str(&format!(" {{{}}}", props.join(", ")));
        }
        out.push(')');
        out
    }
}

impl PropertyRef {
    fn render(&self) -> String {
        format!("{}.{}", self.variable, self.property)
    }
}

impl GraphPatternQuery {
    pub fn render(&self) -> String {
        let mut out = format!("MATCH {}", self.head.render());
        if let Some(hop) = &self.hop {
            let (left, right) = match hop.direction {
                Direction::Outgoing => ("-", "->"),
                Direction::Incoming => ("<-", "-"),
                Direction::Either => ("-", "-"),
            };
            out.push_str(&format!("{left}[:{}]{right}{}", hop.rel_type, hop.target.render()));
        }
        if !self.where_clause.is_empty() {
            let conds: Vec<String> = self
                .where_clause
                .iter()
                .map(|c| format!("{} {} {}", c.target.render(), c.op, render_literal(&c.value)))
                .collect();
            out.push_str(" WHERE ");
            out.push_str(&conds.join(" AND "));
        }
        let rets: Vec<String> = self.returns.iter().map(PropertyRef::render).collect();
        out.push_str(" RETURN ");
        out.push_str(&rets.join(", "));
        out.push(';');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hop_with_inline_properties() {
        let text = "MATCH (r:Researcher {name: 'Arnab Mitra Utsab'})-[:COLLABORATES_WITH]->(collaborator:Researcher) RETURN collaborator.name;";
        let q = validate_graph_pattern(text).unwrap();
        assert_eq!(q.head.label.as_deref(), Some("Researcher"));
        assert_eq!(q.head.properties, vec![("name".into(), Value::Str("Arnab Mitra Utsab".into()))]);
        let hop = q.hop.as_ref().unwrap();
        assert_eq!((hop.rel_type.as_str(), hop.direction), ("COLLABORATES_WITH", Direction::Outgoing));
        assert_eq!(hop.target.variable, "collaborator");
        assert_eq!(q.render(), text);
    }

    #[test]
    fn unlabeled_target_with_where() {
        let q = validate_graph_pattern(
            "MATCH (r:Researcher)-[:WORKS_ON]->(project) WHERE project.domain = 'AI in Healthcare' RETURN r.name;",
        )
        .unwrap();
        assert_eq!(q.hop.as_ref().unwrap().target.label, None);
        assert_eq!(q.where_clause.len(), 1);
        assert_eq!(q.where_clause[0].target.property, "domain");
    }

    #[test]
    fn minimal_and_directions() {
        let q = validate_graph_pattern("match (r:Researcher) return r.name").unwrap();
        assert!(q.hop.is_none() && q.where_clause.is_empty());
        for (text, dir) in [
            ("MATCH (a)<-[:T]-(b) RETURN b.x", Direction::Incoming),
            ("MATCH (a)-[:T]-(b) RETURN b.x", Direction::Either),
        ] {
            let q = validate_graph_pattern(text).unwrap();
            assert_eq!(q.hop.as_ref().unwrap().direction, dir);
            assert_eq!(validate_graph_pattern(&q.render()).unwrap(), q);
        }
    }

    #[test]
    fn subset_boundaries() {
        let unsupported = [
            "MATCH (a)-[:T]->(b)-[:U]->(c) RETURN c.x",
            "MATCH (a)-[:T*1..3]->(b) RETURN b.x",
            "MATCH (a) WHERE a.x = 1 OR a.y = 2 RETURN a.x",
            "MATCH (a), (b) RETURN a.x",
            "OPTIONAL MATCH (a) RETURN a.x",
            "MATCH (a) RETURN a.x ORDER BY a.x",
            "MATCH (a)-[r:T]->(b) RETURN b.x",
        ];
        for text in unsupported {
            assert!(
                matches!(validate_graph_pattern(text), Err(ValidationError::UnsupportedPattern { .. })),
                "{text}"
            );
        }
        assert!(matches!(
            validate_graph_pattern("MATCH (a) RETURN b.x"),
            Err(ValidationError::ParseError { .. })
        ));
    }

    #[test]
    fn writes_are_rejected() {
        for text in [
            "CREATE (n:Researcher {name: 'x'})",
            "MATCH (n:Researcher) SET n.name = 'x' RETURN n.name",
            "MATCH (n) DETACH DELETE n",
            "MERGE (n:Researcher {name: 'x'})",
        ] {
            assert!(validate_graph_pattern(text).unwrap_err().is_read_only_violation(), "{text}");
        }
    }

    #[test]
    fn escaped_quotes_round_trip() {
        let q = validate_graph_pattern(r"MATCH (a {name: 'O\'Brien \\ co'}) RETURN a.name").unwrap();
        assert_eq!(q.head.properties[0].1, Value::Str("O'Brien \\ co".into()));
        assert_eq!(validate_graph_pattern(&q.render()).unwrap(), q);
    }
}
