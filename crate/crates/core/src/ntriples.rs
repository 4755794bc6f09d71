//! Line-oriented N-Triples subset: URI triples and literal-object triples.
//!
//! Accepted per line: `<s> <p> <o> .`, `<s> <p> "literal" .` with an optional
//! `@lang` or `^^<datatype>` suffix (recorded nowhere — only the lexical form
//! is kept), blank lines and `#` comments. Blank nodes are rejected since the
//! store has no representation for anonymous terms.

use std::io::{self, Write};

use crate::store::StoreError;

/// One parsed statement; the borrow lives as long as the input line.
#[derive(Debug, PartialEq, Eq)]
pub enum Statement<'a> {
    Uri { subject: &'a str, predicate: &'a str, object: &'a str },
    Literal { subject: &'a str, predicate: &'a str, value: String },
}

fn err(line: usize, message: impl Into<String>) -> StoreError {
    StoreError::Parse { line, message: message.into() }
}

/// Parses one line; `Ok(None)` for blanks and comments.
pub fn parse_line(line: &str, lineno: usize) -> Result<Option<Statement<'_>>, StoreError> {
    let text = line.trim();
    if text.is_empty() || text.starts_with('#') {
        return Ok(None);
    }
    let mut rest = text;
    let subject = take_uri(&mut rest, lineno, "subject")?;
    skip_ws(&mut rest);
    let predicate = take_uri(&mut rest, lineno, "predicate")?;
    skip_ws(&mut rest);
    let statement = if rest.starts_with('<') {
        let object = take_uri(&mut rest, lineno, "object")?;
        Statement::Uri { subject, predicate, object }
    } else if rest.starts_with('"') {
        let value = take_literal(&mut rest, lineno)?;
        Statement::Literal { subject, predicate, value }
    } else if rest.starts_with("_:") {
        return Err(err(lineno, "blank node objects are not supported"));
    } else {
        return Err(err(lineno, "expected URI or literal object"));
    };
    skip_ws(&mut rest);
    let Some(tail) = rest.strip_prefix('.') else {
        return Err(err(lineno, "expected terminating '.'"));
    };
    if !tail.trim().is_empty() {
        return Err(err(lineno, "unexpected trailing content after '.'"));
    }
    Ok(Some(statement))
}

fn skip_ws(rest: &mut &str) {
    *rest = rest.trim_start();
}

fn take_uri<'a>(rest: &mut &'a str, lineno: usize, position: &str) -> Result<&'a str, StoreError> {
    if rest.starts_with("_:") {
        return Err(err(lineno, format!("blank node {position}s are not supported")));
    }
    let Some(inner) = rest.strip_prefix('<') else {
        return Err(err(lineno, format!("expected '<' opening the {position} URI")));
    };
    let Some(end) = inner.find('>') else {
        return Err(err(lineno, format!("unterminated {position} URI")));
    };
    let uri = &inner[..end];
    if uri.is_empty() {
        return Err(err(lineno, format!("empty {position} URI")));
    }
    if uri.chars().any(|c| c.is_whitespace() || c == '<' || c == '"') {
        return Err(err(lineno, format!("invalid character in {position} URI")));
    }
    *rest = &inner[end + 1..];
    Ok(uri)
}

/// Parses `"..."` with standard escapes, then swallows an optional language
/// tag or datatype annotation.
fn take_literal(rest: &mut &str, lineno: usize) -> Result<String, StoreError> {
    let mut chars = rest.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return Err(err(lineno, "expected '\"' opening the literal")),
    }
    let mut value = String::new();
    let close;
    loop {
        let Some((i, c)) = chars.next() else {
            return Err(err(lineno, "unterminated literal"));
        };
        match c {
            '"' => {
                close = i;
                break;
            }
            '\\' => {
                let Some((_, esc)) = chars.next() else {
                    return Err(err(lineno, "dangling escape in literal"));
                };
                match esc {
                    '"' => value.push('"'),
                    '\\' => value.push('\\'),
                    'n' => value.push('\n'),
                    'r' => value.push('\r'),
                    't' => value.push('\t'),
                    'u' | 'U' => {
                        let want = if esc == 'u' { 4 } else { 8 };
                        let mut code = String::with_capacity(want);
                        for _ in 0..want {
                            match chars.next() {
                                Some((_, h)) if h.is_ascii_hexdigit() => code.push(h),
                                _ => return Err(err(lineno, "malformed unicode escape")),
                            }
                        }
                        let cp = u32::from_str_radix(&code, 16).expect("hex digits");
                        match char::from_u32(cp) {
                            Some(ch) => value.push(ch),
                            None => return Err(err(lineno, "escape is not a scalar value")),
                        }
                    }
                    other => return Err(err(lineno, format!("unknown escape '\\{other}'"))),
                }
            }
            other => value.push(other),
        }
    }
    let mut tail = &rest[close + 1..];
    if let Some(lang) = tail.strip_prefix('@') {
        let end = lang
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
            .unwrap_or(lang.len());
        if end == 0 {
            return Err(err(lineno, "empty language tag"));
        }
        tail = &lang[end..];
    } else if let Some(mut dt) = tail.strip_prefix("^^") {
        take_uri(&mut dt, lineno, "datatype")?;
        tail = dt;
    }
    *rest = tail;
    Ok(value)
}

fn escape_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

pub fn write_uri_triple(
    mut out: impl Write,
    subject: &str,
    predicate: &str,
    object: &str,
) -> io::Result<()> {
    writeln!(out, "<{subject}> <{predicate}> <{object}> .")
}

pub fn write_literal_triple(
    mut out: impl Write,
    subject: &str,
    predicate: &str,
    value: &str,
) -> io::Result<()> {
    writeln!(out, "<{subject}> <{predicate}> \"{}\" .", escape_literal(value))
}
