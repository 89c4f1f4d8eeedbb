//! `SELECT cols FROM table [WHERE expr] [ORDER BY col [ASC|DESC]] [LIMIT n]`

use serde::Serialize;

use super::lexer::{tokenize, Cursor, LexOptions, Tok, Token};
use super::{normalize_query_whitespace, number_value, render_float, CompareOp, ValidationError};
use crate::model::Value;

const LEX: LexOptions = LexOptions {
    doubled_quotes: true,
    backslash_escapes: false,
    dollar_idents: false,
};

const MUTATION_KEYWORDS: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "TRUNCATE", "REPLACE", "MERGE", "GRANT", "REVOKE",
    "SET", "RENAME", "CALL", "EXEC", "EXECUTE", "LOCK", "LOAD",
];

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "ORDER", "BY", "ASC", "DESC", "LIMIT", "OFFSET", "TRUE",
    "FALSE", "NULL", "JOIN", "INNER", "LEFT", "RIGHT", "OUTER", "ON", "GROUP", "HAVING", "UNION", "AS", "IN",
    "LIKE", "IS", "BETWEEN", "DISTINCT", "WITH", "INTO", "VALUES", "EXPLAIN", "SHOW", "DESCRIBE", "USE",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlSelect {
    pub columns: Projection,
    pub table: String,
    pub predicate: Option<Predicate>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Projection {
    Star,
    Columns(Vec<String>),
}

/// Boolean expression tree. `And` and `Or` hold at least two children and
/// never directly contain a node of their own kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Predicate {
    Compare(Comparison),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub column: String,
    pub op: CompareOp,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderBy {
    pub column: String,
    pub direction: SortDirection,
}

pub fn validate_sql(text: &str) -> Result<SqlSelect, ValidationError> {
    let norm = normalize_query_whitespace(text);
    let tokens = tokenize(&norm, LEX)?;
    read_only_gate(&tokens)?;
    let mut cur = Cursor::new(&tokens, norm.len());
    let select = parse_select(&mut cur)?;
    cur.eat_punct(";");
    if !cur.at_end() {
        return Err(cur.error("end of statement"));
    }
    Ok(select)
}

fn read_only_gate(tokens: &[Token]) -> Result<(), ValidationError> {
    for t in tokens {
        if let Tok::Ident(word) = &t.tok {
            if MUTATION_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word)) {
                return Err(ValidationError::ReadOnlyViolation {
                    keyword: word.to_ascii_uppercase(),
                    position: t.start,
                });
            }
        }
    }
    match tokens.first() {
        Some(Token {
            tok: Tok::Ident(word),
            start,
            ..
        }) if !word.eq_ignore_ascii_case("SELECT") && is_reserved(word) => Err(ValidationError::ReadOnlyViolation {
            keyword: word.to_ascii_uppercase(),
            position: *start,
        }),
        _ => Ok(()),
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

fn identifier(cur: &mut Cursor<'_>, what: &str) -> Result<String, ValidationError> {
    match cur.peek() {
        Some(Token {
            tok: Tok::Ident(name), ..
        }) if !is_reserved(name) => {
            cur.next();
            Ok(name.clone())
        }
        _ => Err(cur.error(what)),
    }
}

fn parse_select(cur: &mut Cursor<'_>) -> Result<SqlSelect, ValidationError> {
    cur.expect_keyword("SELECT")?;
    let columns = if cur.eat_punct("*") {
        Projection::Star
    } else {
        let mut cols = vec![identifier(cur, "a column name or `*`")?];
        while cur.eat_punct(",") {
            cols.push(identifier(cur, "a column name")?);
        }
        Projection::Columns(cols)
    };
    cur.expect_keyword("FROM")?;
    let table = identifier(cur, "a table name")?;
    let predicate = if cur.eat_keyword("WHERE") {
        Some(parse_or(cur)?)
    } else {
        None
    };
    let order_by = if cur.eat_keyword("ORDER") {
        cur.expect_keyword("BY")?;
        let column = identifier(cur, "a column name")?;
        let direction = if cur.eat_keyword("DESC") {
            SortDirection::Desc
        } else {
            cur.eat_keyword("ASC");
            SortDirection::Asc
        };
        Some(OrderBy { column, direction })
    } else {
        None
    };
    let limit = if cur.eat_keyword("LIMIT") {
        let at = cur.offset();
        match cur.next() {
            Some(Token {
                tok: Tok::Number(raw), ..
            }) => match raw.parse::<u64>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(ValidationError::parse(at, "a positive integer", format!("number {raw}"))),
            },
            other => return Err(ValidationError::parse(at, "a positive integer", super::lexer::describe(other))),
        }
    } else {
        None
    };
    Ok(SqlSelect {
        columns,
        table,
        predicate,
        order_by,
        limit,
    })
}

fn parse_or(cur: &mut Cursor<'_>) -> Result<Predicate, ValidationError> {
    let mut terms = vec![parse_and(cur)?];
    while cur.eat_keyword("OR") {
        terms.push(parse_and(cur)?);
    }
    Ok(flatten(terms, true))
}

fn parse_and(cur: &mut Cursor<'_>) -> Result<Predicate, ValidationError> {
    let mut terms = vec![parse_atom(cur)?];
    while cur.eat_keyword("AND") {
        terms.push(parse_atom(cur)?);
    }
    Ok(flatten(terms, false))
}

fn flatten(terms: Vec<Predicate>, is_or: bool) -> Predicate {
    if terms.len() == 1 {
        return terms.into_iter().next().expect("one term");
    }
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match (t, is_or) {
            (Predicate::Or(inner), true) | (Predicate::And(inner), false) => flat.extend(inner),
            (other, _) => flat.push(other),
        }
    }
    if is_or {
        Predicate::Or(flat)
    } else {
        Predicate::And(flat)
    }
}

fn parse_atom(cur: &mut Cursor<'_>) -> Result<Predicate, ValidationError> {
    if cur.eat_punct("(") {
        let inner = parse_or(cur)?;
        cur.expect_punct(")")?;
        return Ok(inner);
    }
    let column = identifier(cur, "a column name or `(`")?;
    let op = match cur.peek() {
        Some(Token {
            tok: Tok::Punct(p), ..
        }) => CompareOp::from_punct(p),
        _ => None,
    }
    .ok_or_else(|| cur.error("a comparison operator"))?;
    cur.next();
    let value = literal(cur)?;
    Ok(Predicate::Compare(Comparison { column, op, value }))
}

fn literal(cur: &mut Cursor<'_>) -> Result<Value, ValidationError> {
    let at = cur.offset();
    let negative = cur.eat_punct("-");
    match cur.peek() {
        Some(Token {
            tok: Tok::Number(raw), ..
        }) => {
            cur.next();
            number_value(raw, negative, at)
        }
        Some(Token { tok: Tok::Str(s), .. }) if !negative => {
            cur.next();
            Ok(Value::Str(s.clone()))
        }
        Some(Token {
            tok: Tok::Ident(w), ..
        }) if !negative && (w.eq_ignore_ascii_case("TRUE") || w.eq_ignore_ascii_case("FALSE")) => {
            cur.next();
            Ok(Value::Bool(w.eq_ignore_ascii_case("TRUE")))
        }
        _ => Err(cur.error("a literal")),
    }
}

fn render_literal(v: &Value) -> String {
    match v {
        Value::Str(s) | Value::Date(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => render_float(*x),
        Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        Value::Null => "NULL".to_string(),
    }
}

impl Predicate {
    fn render_into(&self, out: &mut String, parent_is_and: bool) {
        match self {
            Predicate::Compare(c) => {
                out.push_str(&format!("{} {} {}", c.column, c.op, render_literal(&c.value)));
            }
            Predicate::And(items) => join(out, items, " AND ", true),
            Predicate::Or(items) => {
                if parent_is_and {
                    out.push('(');
                }
                join(out, items, " OR ", false);
                if parent_is_and {
                    out.push(')');
                }
            }
        }
    }
}

fn join(out: &mut String, items: &[Predicate], sep: &str, is_and: bool) {
    for (i, p) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        // Nested nodes of the same kind cannot occur, but parenthesize them
        // anyway so hand-built trees still render unambiguously.
        let same_kind = matches!((p, is_and), (Predicate::And(_), true) | (Predicate::Or(_), false));
        if same_kind {
            out.push('(');
        }
        p.render_into(out, is_and);
        if same_kind {
            out.push(')');
        }
    }
}

impl SqlSelect {
    pub fn render(&self) -> String {
        let mut out = String::from("SELECT ");
        match &self.columns {
            Projection::Star => out.push('*'),
            Projection::Columns(cols) => out.push_str(&cols.join(", ")),
        }
        out.push_str(" FROM ");
        out.push_str(&self.table);
        if let Some(p) = &self.predicate {
            out.push_str(" WHERE ");
            p.render_into(&mut out, false);
        }
        if let Some(o) = &self.order_by {
            out.push_str(" ORDER BY ");
            out.push_str(&o.column);
            out.push_str(match o.direction {
                SortDirection::Asc => " ASC",
                SortDirection::Desc => " DESC",
            });
        }
        if let Some(n) = self.limit {
            out.push_str(&format!(" LIMIT {n}"));
        }
        out.push(';');
        out
    }
}
