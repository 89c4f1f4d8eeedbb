//! Tokenizer shared by the SQL, document-filter and graph-pattern parsers.
//!
//! Positions are byte offsets into the input.

use super::ValidationError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Unsigned numeric literal, kept as written.
    Number(String),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LexOptions {
    /// `''` inside a single-quoted string is an escaped quote (SQL).
    pub doubled_quotes: bool,
    /// Backslash escapes inside strings (JSON, Cypher, JavaScript).
    pub backslash_escapes: bool,
    /// Allow `$` inside identifiers (`$gt`).
    pub dollar_idents: bool,
}

const PUNCT2: [&str; 6] = ["->", "<-", "<=", ">=", "<>", "!="];
const PUNCT1: [&str; 16] = ["(", ")", "[", "]", "{", "}", ",", ".", ":", ";", "=", "<", ">", "*", "-", "+"];

pub(crate) fn describe(tok: Option<&Token>) -> String {
    match tok.map(|t| &t.tok) {
        None => "end of input".to_string(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Number(s)) => format!("number {s}"),
        Some(Tok::Str(s)) => format!("string {s:?}"),
        Some(Tok::Punct(p)) => format!("`{p}`"),
    }
}

pub(crate) fn tokenize(input: &str, opts: LexOptions) -> Result<Vec<Token>, ValidationError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = input[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' || (opts.dollar_idents && c == '$') {
            let mut j = i + 1;
            while j < bytes.len()
                && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || (opts.dollar_idents && bytes[j] == b'$'))
            {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Ident(input[i..j].to_string()),
                start,
                end: j,
            });
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                let mut k = j + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            if j < bytes.len() && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_') {
                return Err(ValidationError::parse(j, "a delimiter after number", format!("`{}`", bytes[j] as char)));
            }
            out.push(Token {
                tok: Tok::Number(input[i..j].to_string()),
                start,
                end: j,
            });
            i = j;
            continue;
        }
        if c == '\'' || c == '"' {
            let (value, end) = lex_string(input, i, c, opts)?;
            out.push(Token {
                tok: Tok::Str(value),
                start,
                end,
            });
            i = end;
            continue;
        }
        if let Some(p) = PUNCT2.iter().find(|p| input[i..].starts_with(**p)) {
            out.push(Token {
                tok: Tok::Punct(p),
                start,
                end: i + 2,
            });
            i += 2;
            continue;
        }
        if let Some(p) = PUNCT1.iter().find(|p| input[i..].starts_with(**p)) {
            out.push(Token {
                tok: Tok::Punct(p),
                start,
                end: i + 1,
            });
            i += 1;
            continue;
        }
        return Err(ValidationError::parse(i, "a token", format!("character {c:?}")));
    }
    Ok(out)
}

fn lex_string(input: &str, start: usize, quote: char, opts: LexOptions) -> Result<(String, usize), ValidationError> {
    let mut value = String::new();
    let mut chars = input[start + 1..].char_indices().peekable();
    while let Some((off, c)) = chars.next() {
        let pos = start + 1 + off;
        if c == quote {
            if opts.doubled_quotes && quote == '\'' {
                if let Some(&(_, '\'')) = chars.peek() {
                    chars.next();
                    value.push('\'');
                    continue;
                }
            }
            return Ok((value, pos + 1));
        }
        if c == '\\' && opts.backslash_escapes {
            let Some((_, e)) = chars.next() else { break };
            match e {
                'n' => value.push('\n'),
                't' => value.push('\t'),
                'r' => value.push('\r'),
                'b' => value.push('\u{8}'),
                'f' => value.push('\u{c}'),
                'u' => {
                    let hex: String = (0..4).filter_map(|_| chars.next().map(|(_, h)| h)).collect();
                    let decoded = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                    match decoded {
                        Some(ch) if hex.len() == 4 => value.push(ch),
                        _ => return Err(ValidationError::parse(pos, "a \\uXXXX escape", format!("\\u{hex}"))),
                    }
                }
                other => value.push(other),
            }
            continue;
        }
        value.push(c);
    }
    Err(ValidationError::parse(start, "a closing quote", "end of input".to_string()))
}

/// Cursor over a token stream with positioned error helpers.
pub(crate) struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    input_len: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(tokens: &'a [Token], input_len: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            input_len,
        }
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    pub fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn offset(&self) -> usize {
        self.peek().map_or(self.input_len, |t| t.start)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub fn error(&self, expected: &str) -> ValidationError {
        ValidationError::parse(self.offset(), expected, describe(self.peek()))
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), ValidationError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ValidationError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(kw))
        }
    }
}
