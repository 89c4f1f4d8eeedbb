//! Position-aware JSON reader over the shared lexer.
//!
//! Strict mode is plain JSON. Relaxed mode also takes the JavaScript object
//! literal forms the document-filter shell accepts: bare keys and
//! single-quoted strings.

use super::lexer::{describe, tokenize, Cursor, LexOptions, Tok, Token};
use super::{number_value, ValidationError};
use crate::model::Value;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum JsonKind {
    Object(Vec<Member>),
    Array(Vec<Json>),
    Scalar(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Json {
    pub kind: JsonKind,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Member {
    pub key: String,
    pub key_pos: usize,
    pub value: Json,
}

pub(crate) const RELAXED: LexOptions = LexOptions {
    doubled_quotes: false,
    backslash_escapes: true,
    dollar_idents: true,
};

const STRICT: LexOptions = LexOptions {
    doubled_quotes: false,
    backslash_escapes: true,
    dollar_idents: false,
};

/// Parses a complete strict JSON document.
pub(crate) fn parse_strict(input: &str) -> Result<Json, ValidationError> {
    let tokens = tokenize(input, STRICT)?;
    let mut reader = Reader {
        input,
        relaxed: false,
    };
    let mut cur = Cursor::new(&tokens, input.len());
    let value = reader.value(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.error("end of document"));
    }
    Ok(value)
}

pub(crate) struct Reader<'s> {
    pub input: &'s str,
    pub relaxed: bool,
}

impl Reader<'_> {
    pub fn value(&mut self, cur: &mut Cursor<'_>) -> Result<Json, ValidationError> {
        let start = cur.offset();
        if cur.eat_punct("{") {
            return self.object_body(cur, start);
        }
        if cur.eat_punct("[") {
            let mut items = Vec::new();
            if !cur.eat_punct("]") {
                loop {
                    items.push(self.value(cur)?);
                    if cur.eat_punct("]") {
                        break;
                    }
                    cur.expect_punct(",")?;
                }
            }
            return Ok(Json {
                kind: JsonKind::Array(items),
                start,
            });
        }
        self.scalar(cur).map(|v| Json {
            kind: JsonKind::Scalar(v),
            start,
        })
    }

    fn object_body(&mut self, cur: &mut Cursor<'_>, start: usize) -> Result<Json, ValidationError> {
        let mut members: Vec<Member> = Vec::new();
        if !cur.eat_punct("}") {
            loop {
                let key_pos = cur.offset();
                let key = self.key(cur)?;
                if members.iter().any(|m| m.key == key) {
                    return Err(ValidationError::parse(key_pos, "a unique key", format!("duplicate key {key:?}")));
                }
                cur.expect_punct(":")?;
                let value = self.value(cur)?;
                members.push(Member { key, key_pos, value });
                if cur.eat_punct("}") {
                    break;
                }
                cur.expect_punct(",")?;
            }
        }
        Ok(Json {
            kind: JsonKind::Object(members),
            start,
        })
    }

    fn key(&self, cur: &mut Cursor<'_>) -> Result<String, ValidationError> {
        match cur.peek() {
            Some(t @ Token { tok: Tok::Str(s), .. }) if self.quote_ok(t) => {
                cur.next();
                Ok(s.clone())
            }
            Some(Token {
                tok: Tok::Ident(s), ..
            }) if self.relaxed => {
                cur.next();
                Ok(s.clone())
            }
            _ => Err(cur.error("an object key")),
        }
    }

    fn quote_ok(&self, t: &Token) -> bool {
        self.relaxed || self.input.as_bytes()[t.start] == b'"'
    }

    fn scalar(&self, cur: &mut Cursor<'_>) -> Result<Value, ValidationError> {
        let at = cur.offset();
        let negative = cur.eat_punct("-");
        let tok = cur.peek();
        let value = match tok.map(|t| &t.tok) {
            Some(Tok::Number(raw)) => number_value(raw, negative, at)?,
            Some(Tok::Str(s)) if !negative && self.quote_ok(tok.expect("peeked")) => Value::Str(s.clone()),
            Some(Tok::Ident(w)) if !negative && w == "true" => Value::Bool(true),
            Some(Tok::Ident(w)) if !negative && w == "false" => Value::Bool(false),
            Some(Tok::Ident(w)) if !negative && w == "null" => Value::Null,
            _ => return Err(ValidationError::parse(cur.offset(), "a value", describe(tok))),
        };
        cur.next();
        Ok(value)
    }
}

/// Escapes a string as a double-quoted JSON literal.
pub(crate) fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_rejects_relaxed_forms() {
        assert!(parse_strict(r#"{"a": [1, -2.5, true, null, "x"]}"#).is_ok());
        assert!(parse_strict("{a: 1}").is_err());
        assert!(parse_strict("{\"a\": 'x'}").is_err());
        assert!(parse_strict(r#"{"a": 1,}"#).is_err());
    }

    #[test]
    fn duplicate_keys_are_positioned() {
        let err = parse_strict(r#"{"a": 1, "a": 2}"#).unwrap_err();
        assert!(matches!(err, ValidationError::ParseError { position: 9, .. }));
    }

    #[test]
    fn quoting_round_trips() {
        let q = quote("he said \"hi\"\n\\");
        let parsed = parse_strict(&q).unwrap();
        assert_eq!(parsed.kind, JsonKind::Scalar(Value::Str("he said \"hi\"\n\\".into())));
    }
}
