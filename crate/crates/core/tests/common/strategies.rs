//! Generators for SQL-like text.

use proptest::prelude::*;
use semfence::KeywordMap;

/// Snake-case identifiers; no part equals a keyword expansion.
pub fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z][a-zA-Z0-9]{0,5}(_[a-zA-Z0-9]{1,5}){0,3}".prop_filter("expansion word", |s| {
        let kw = KeywordMap::default();
        !s.split('_').any(|part| kw.pairs().iter().any(|(_, e)| part.eq_ignore_ascii_case(e)))
    })
}

pub fn keyword() -> impl Strategy<Value = String> {
    let word = prop::sample::select(vec!["avg", "desc", "asc", "select", "from", "where", "order", "by"]);
    (word, 0..3u8).prop_map(|(w, case)| match case {
        0 => w.to_string(),
        1 => w.to_uppercase(),
        _ => w[..1].to_uppercase() + &w[1..],
    })
}

pub fn sql_token() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => ident(),
        2 => (ident(), prop_oneof![ident(), Just("*".to_string())]).prop_map(|(t, c)| format!("{t}.{c}")),
        2 => keyword(),
        1 => prop::sample::select(vec!["3.5", ".5", "10.", "42", "0"]).prop_map(String::from),
        1 => "'[a-zA-Z0-9 _.]{0,8}'",
        1 => "\"[a-zA-Z0-9 _.]{0,8}\"",
        1 => prop::sample::select(vec!["(", ")", ",", "=", ">", "<=", "*"]).prop_map(String::from),
    ]
}

pub fn sql_text() -> impl Strategy<Value = String> {
    prop::collection::vec((sql_token(), prop::sample::select(vec!["", " ", "  "])), 1..12).prop_map(|parts| {
        let mut s = String::new();
        for (tok, sep) in parts {
            // A number glued to a preceding word would leave a dangling dot
            // (`a` + `10.`), which is not SQL.
            let numeric = tok.starts_with(|c: char| c.is_ascii_digit() || c == '.');
            if numeric && s.ends_with(|c: char| c.is_alphanumeric() || c == '_') {
                s.push(' ');
            }
            s.push_str(&tok);
            s.push_str(sep);
        }
        s.trim_end().to_string()
    })
}
