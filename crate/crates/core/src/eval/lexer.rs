use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Bare or backtick-quoted identifier; keywords are recognised by the
    /// parser, case-insensitively.
    Ident { text: String, quoted: bool },
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

const SYMBOLS: [&str; 18] = [
    "<>", "!=", "<=", ">=", "==", "||", "(", ")", ",", ".", "*", "+", "-", "/", "%", "=", "<", ">",
];

pub(crate) fn lex(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = sql[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == ';' {
            out.push(Token { tok: Tok::Sym(";"), offset: start });
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            let (text, end) = quoted(sql, i, c)?;
            out.push(Token { tok: Tok::Str(text), offset: start });
            i = end;
            continue;
        }
        if c == '`' {
            let (text, end) = quoted(sql, i, '`')?;
            out.push(Token { tok: Tok::Ident { text, quoted: true }, offset: start });
            i = end;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Number(sql[start..i].to_string()), offset: start });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while let Some(ch) = sql[i..].chars().next() {
                if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Ident { text: sql[start..i].to_string(), quoted: false },
                offset: start,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| sql[i..].starts_with(**s)) {
            Some(&s) => {
                let sym = match s {
                    "<>" => "!=",
                    "==" => "=",
                    s => s,
                };
                out.push(Token { tok: Tok::Sym(sym), offset: start });
                i += s.len();
            }
            None => {
                return Err(SqlError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, offset: sql.len() });
    Ok(out)
}

/// Read a literal delimited by `q`, where a doubled delimiter or a backslash
/// escapes the next character. Returns the unescaped body and the end offset.
fn quoted(sql: &str, start: usize, q: char) -> Result<(String, usize), SqlError> {
    let mut body = String::new();
    let mut chars = sql[start + 1..].char_indices().peekable();
    while let Some((k, ch)) = chars.next() {
        if ch == '\\' {
            if let Some((_, next)) = chars.next() {
                body.push(next);
            }
        } else if ch == q {
            if chars.peek().is_some_and(|&(_, n)| n == q) {
                body.push(q);
                chars.next();
            } else {
                return Ok((body, start + 1 + k + 1));
            }
        } else {
            body.push(ch);
        }
    }
    Err(SqlError::Syntax {
        offset: start,
        message: "unterminated quoted literal".into(),
    })
}

/// True when the query has an ORDER BY outside every parenthesis.
pub(crate) fn has_top_level_order_by(sql: &str) -> bool {
    let Ok(tokens) = lex(sql) else {
        return false;
    };
    let mut depth = 0usize;
    let is_kw = |t: &Token, kw: &str| matches!(&t.tok, Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw));
    for (i, t) in tokens.iter().enumerate() {
        match t.tok {
            Tok::Sym("(") => depth += 1,
            Tok::Sym(")") => depth = depth.saturating_sub(1),
            _ => {
                if depth == 0 && is_kw(t, "order") && tokens.get(i + 1).is_some_and(|n| is_kw(n, "by")) {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            toks("SELECT T1.a <> 'it''s' , 3.5e2"),
            vec![
                Tok::Ident { text: "SELECT".into(), quoted: false },
                Tok::Ident { text: "T1".into(), quoted: false },
                Tok::Sym("."),
                Tok::Ident { text: "a".into(), quoted: false },
                Tok::Sym("!="),
                Tok::Str("it's".into()),
                Tok::Sym(","),
                Tok::Number("3.5e2".into()),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn double_quotes_are_strings() {
        assert_eq!(toks("\"English\"")[0], Tok::Str("English".into()));
        assert_eq!(
            toks("`my col`")[0],
            Tok::Ident { text: "my col".into(), quoted: true }
        );
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            lex("select 'abc"),
            Err(SqlError::Syntax { offset: 7, message: "unterminated quoted literal".into() })
        );
        assert!(matches!(lex("select #"), Err(SqlError::Syntax { offset: 7, .. })));
    }

    #[test]
    fn order_by_detection() {
        assert!(has_top_level_order_by("select a from t order by a"));
        assert!(!has_top_level_order_by("select a from t where a in (select b from s order by b)"));
        assert!(!has_top_level_order_by("select 'order by' from t"));
    }
}
