//! Token preprocessing for schema text and SQL: space out snake-case
//! underscores and `Table.Column` dots, and spell out abbreviated keywords.
//! [`postprocess_sql`] inverts the SQL rewrite.
//!
//! Known limits of the inverse: an identifier that begins or ends with `_`
//! next to whitespace, or an identifier equal to an expanded keyword
//! (`average`), does not survive a round trip.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("unbalanced quote opened at byte {offset}")]
    UnbalancedQuote { offset: usize },
    #[error("invalid keyword map: {0}")]
    KeywordMap(String),
}

/// Abbreviated keyword -> spelled-out form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordMap {
    pairs: Vec<(String, String)>,
}

impl Default for KeywordMap {
    fn default() -> Self {
        KeywordMap::new([("avg", "average"), ("desc", "descending"), ("asc", "ascending")])
            .expect("default keyword map is valid")
    }
}

impl KeywordMap {
    pub fn new<I, A, B>(pairs: I) -> Result<Self, PreprocessError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let pairs: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(a, b)| (a.into().to_lowercase(), b.into().to_lowercase()))
            .collect();
        let bad = |m: String| Err(PreprocessError::KeywordMap(m));
        let mut abbrevs = HashSet::new();
        let mut expansions = HashSet::new();
        for (a, e) in &pairs {
            let word = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_alphanumeric());
            if !word(a) || !word(e) {
                return bad(format!("`{a}` -> `{e}`: entries must be single words"));
            }
            if a == e {
                return bad(format!("`{a}` maps to itself"));
            }
            if !abbrevs.insert(a.as_str()) {
                return bad(format!("`{a}` listed twice"));
            }
            if !expansions.insert(e.as_str()) {
                return bad(format!("expansion `{e}` is shared by two abbreviations"));
            }
        }
        if let Some((_, e)) = pairs.iter().find(|(_, e)| abbrevs.contains(e.as_str())) {
            return bad(format!("expansion `{e}` is also an abbreviation"));
        }
        Ok(KeywordMap { pairs })
    }

    /// Two tab-separated columns per line: abbreviation, expansion. Blank
    /// lines and `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, PreprocessError> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(str::trim);
            match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(e), None) => pairs.push((a.to_string(), e.to_string())),
                _ => {
                    return Err(PreprocessError::KeywordMap(format!(
                        "line {}: expected two tab-separated columns",
                        n + 1
                    )))
                }
            }
        }
        KeywordMap::new(pairs)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        self.pairs.iter().any(|(a, _)| *a == lower)
    }

    fn expand(&self, word: &str) -> Option<&str> {
        let lower = word.to_lowercase();
        self.pairs
            .iter()
            .find(|(a, _)| *a == lower)
            .map(|(_, e)| e.as_str())
    }

    fn contract(&self, word: &str) -> Option<&str> {
        let lower = word.to_lowercase();
        self.pairs
            .iter()
            .find(|(_, e)| *e == lower)
            .map(|(a, _)| a.as_str())
    }
}

#[derive(Clone, Copy)]
enum Case {
    Lower,
    Upper,
    Title,
}

impl Case {
    fn of(word: &str) -> Option<Case> {
        if word.chars().all(|c| !c.is_uppercase()) {
            return Some(Case::Lower);
        }
        if word.chars().all(|c| !c.is_lowercase()) {
            return Some(Case::Upper);
        }
        let mut chars = word.chars();
        let first = chars.next()?;
        (first.is_uppercase() && chars.all(|c| !c.is_uppercase())).then_some(Case::Title)
    }

    fn apply(self, lower: &str) -> String {
        match self {
            Case::Lower => lower.to_string(),
            Case::Upper => lower.to_uppercase(),
            Case::Title => {
                let mut chars = lower.chars();
                match chars.next() {
                    Some(c) => c.to_uppercase().chain(chars).collect(),
                    None => String::new(),
                }
            }
        }
    }
}

/// Characters plus a flag marking which ones sit inside a quoted literal.
struct Masked {
    chars: Vec<char>,
    quoted: Vec<bool>,
}

impl Masked {
    fn plain(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let quoted = vec![false; chars.len()];
        Masked { chars, quoted }
    }

    /// Mark single- and double-quoted literals, honouring backslash escapes.
    fn sql(text: &str) -> Result<Self, PreprocessError> {
        let mut chars = Vec::with_capacity(text.len());
        let mut quoted = Vec::with_capacity(text.len());
        let mut open: Option<(char, usize)> = None;
        let mut escaped = false;
        for (offset, ch) in text.char_indices() {
            chars.push(ch);
            match open {
                None => {
                    if ch == '\'' || ch == '"' {
                        open = Some((ch, offset));
                        quoted.push(true);
                    } else {
                        quoted.push(false);
                    }
                }
                Some((q, _)) => {
                    quoted.push(true);
                    if escaped {
                        escaped = false;
                    } else if ch == '\\' {
                        escaped = true;
                    } else if ch == q {
                        open = None;
                    }
                }
            }
        }
        if let Some((_, offset)) = open {
            return Err(PreprocessError::UnbalancedQuote { offset });
        }
        Ok(Masked { chars, quoted })
    }

    fn len(&self) -> usize {
        self.chars.len()
    }

    fn code(&self, i: usize) -> Option<char> {
        match (self.chars.get(i), self.quoted.get(i)) {
            (Some(&c), Some(false)) => Some(c),
            _ => None,
        }
    }

    fn into_string(self) -> String {
        self.chars.into_iter().collect()
    }
}

#[derive(Default)]
struct Builder {
    chars: Vec<char>,
    quoted: Vec<bool>,
}

impl Builder {
    fn push(&mut self, c: char, quoted: bool) {
        self.chars.push(c);
        self.quoted.push(quoted);
    }

    fn space(&mut self) {
        self.push(' ', false);
    }

    fn ends_with_space(&self) -> bool {
        self.chars.last().is_some_and(|c| c.is_whitespace())
    }

    fn pop_space(&mut self) {
        if self.chars.last() == Some(&' ') && self.quoted.last() == Some(&false) {
            self.chars.pop();
            self.quoted.pop();
        }
    }

    fn finish(self) -> Masked {
        Masked {
            chars: self.chars,
            quoted: self.quoted,
        }
    }
}

fn is_ident(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn space_underscores(m: Masked) -> Masked {
    let mut b = Builder::default();
    for i in 0..m.len() {
        let (c, q) = (m.chars[i], m.quoted[i]);
        if q || c != '_' {
            b.push(c, q);
            continue;
        }
        if !b.chars.is_empty() && !b.ends_with_space() {
            b.space();
        }
        b.push('_', false);
        if m.chars.get(i + 1).is_some_and(|n| !n.is_whitespace()) {
            b.space();
        }
    }
    b.finish()
}

/// A dot belongs to a numeric literal when the identifier run before it is
/// all digits (and non-empty), or is empty and a digit follows.
fn is_numeric_dot(m: &Masked, i: usize) -> bool {
    let mut j = i;
    while j > 0 && m.code(j - 1).is_some_and(is_ident) {
        j -= 1;
    }
    let before = &m.chars[j..i];
    if before.is_empty() {
        m.code(i + 1).is_some_and(|c| c.is_ascii_digit())
    } else {
        before.iter().all(|c| c.is_ascii_digit())
    }
}

fn space_dots(m: Masked) -> Masked {
    let mut b = Builder::default();
    for i in 0..m.len() {
        let (c, q) = (m.chars[i], m.quoted[i]);
        if q || c != '.' || is_numeric_dot(&m, i) {
            b.push(c, q);
            continue;
        }
        if !b.chars.is_empty() && !b.ends_with_space() {
            b.space();
        }
        b.push('.', false);
        if m.chars.get(i + 1).is_some_and(|n| !n.is_whitespace()) {
            b.space();
        }
    }
    b.finish()
}

/// Rewrite each standalone unquoted word for which `map` returns a
/// replacement, keeping its case pattern.
fn rewrite_words<'k>(m: Masked, map: impl Fn(&str) -> Option<&'k str>) -> Masked {
    let mut b = Builder::default();
    let mut i = 0;
    while i < m.len() {
        if m.code(i).is_some_and(is_ident) {
            let start = i;
            while m.code(i).is_some_and(is_ident) {
                i += 1;
            }
            let word: String = m.chars[start..i].iter().collect();
            let replacement = Case::of(&word).and_then(|case| map(&word).map(|r| case.apply(r)));
            for c in replacement.as_deref().unwrap_or(&word).chars() {
                b.push(c, false);
            }
        } else {
            b.push(m.chars[i], m.quoted[i]);
            i += 1;
        }
    }
    b.finish()
}

/// Surround every underscore with single spaces, never doubling an
/// existing space.
pub fn preprocess_schema(text: &str) -> String {
    space_underscores(Masked::plain(text)).into_string()
}

/// Apply, outside quoted literals: underscore spacing, `Table.Column` dot
/// spacing (numeric dots untouched), then keyword expansion.
pub fn preprocess_sql(sql: &str, keywords: &KeywordMap) -> Result<String, PreprocessError> {
    let m = Masked::sql(sql)?;
    let m = space_underscores(m);
    let m = space_dots(m);
    let m = rewrite_words(m, |w| keywords.expand(w));
    Ok(m.into_string())
}

fn collapse_dots(m: Masked) -> Masked {
    let mut b = Builder::default();
    let mut i = 0;
    while i < m.len() {
        let collapsible = m.code(i) == Some('.')
            && i >= 2
            && m.code(i - 1) == Some(' ')
            && m.code(i + 1) == Some(' ')
            && m.code(i - 2).is_some_and(is_ident)
            && m.code(i + 2).is_some_and(|c| is_ident(c) || c == '*');
        if collapsible {
            b.pop_space();
            b.push('.', false);
            i += 2;
        } else {
            b.push(m.chars[i], m.quoted[i]);
            i += 1;
        }
    }
    b.finish()
}

fn collapse_underscores(m: Masked) -> Masked {
    let mut b = Builder::default();
    let mut i = 0;
    while i < m.len() {
        if m.code(i) == Some('_') {
            b.pop_space();
            b.push('_', false);
            i += 1;
            if m.code(i) == Some(' ') && i + 1 < m.len() {
                i += 1;
            }
        } else {
            b.push(m.chars[i], m.quoted[i]);
            i += 1;
        }
    }
    b.finish()
}

/// Inverse of [`preprocess_sql`]: contract expanded keywords, then join
/// spaced dots and underscores.
pub fn postprocess_sql(text: &str, keywords: &KeywordMap) -> Result<String, PreprocessError> {
    let m = Masked::sql(text)?;
    let m = rewrite_words(m, |w| keywords.contract(w));
    let m = collapse_dots(m);
    let m = collapse_underscores(m);
    Ok(m.into_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pre(s: &str) -> String {
        preprocess_sql(s, &KeywordMap::default()).unwrap()
    }

    fn post(s: &str) -> String {
        postprocess_sql(s, &KeywordMap::default()).unwrap()
    }

    #[test]
    fn schema_underscores() {
        assert_eq!(preprocess_schema("booking_status_code"), "booking _ status _ code");
        assert_eq!(preprocess_schema("document_type"), "document _ type");
        assert_eq!(preprocess_schema("budget"), "budget");
        assert_eq!(preprocess_schema("a__b"), "a _ _ b");
        assert_eq!(preprocess_schema("_a_"), "_ a _");
        assert_eq!(preprocess_schema("a _ b"), "a _ b");
        assert_eq!(preprocess_schema(""), "");
    }

    #[test]
    fn sql_rules() {
        assert_eq!(
            pre("select avg ( flight.price ) where flight.origin = 'New York'"),
            "select average ( flight . price ) where flight . origin = 'New York'"
        );
        assert_eq!(pre("select * from t"), "select * from t");
        assert_eq!(pre("where x = 3.5"), "where x = 3.5");
        assert_eq!(pre("where x > .5 and y < 10."), "where x > .5 and y < 10.");
        assert_eq!(pre("farm.cows"), "farm . cows");
        assert_eq!(pre("origin.flight"), "origin . flight");
        assert_eq!(pre("avg"), "average");
        assert_eq!(pre("desc"), "descending");
        assert_eq!(pre("ORDER BY T1.age DESC"), "ORDER BY T1 . age DESCENDING");
        assert_eq!(pre("count(head.*)"), "count(head . *)");
    }

    #[test]
    fn literals_untouched() {
        let q = r#"select a_b from t where c = 'x_y.z avg' and d = "p.q_r" and e = 'it\'s_ok'"#;
        assert_eq!(
            pre(q),
            r#"select a _ b from t where c = 'x_y.z avg' and d = "p.q_r" and e = 'it\'s_ok'"#
        );
    }

    #[test]
    fn snake_identifier_keyword_segment_is_expanded_and_restored() {
        assert_eq!(pre("select avg_price from t"), "select average _ price from t");
        assert_eq!(post("select average _ price from t"), "select avg_price from t");
        assert_eq!(pre("select Avg_Price"), "select Average _ Price");
        assert_eq!(post("select Average _ Price"), "select Avg_Price");
    }

    #[test]
    fn unbalanced_quote() {
        assert_eq!(
            preprocess_sql("select 'abc from t", &KeywordMap::default()),
            Err(PreprocessError::UnbalancedQuote { offset: 7 })
        );
        assert!(postprocess_sql("x = \"y", &KeywordMap::default()).is_err());
    }

    #[test]
    fn postprocess_examples() {
        assert_eq!(post("select average ( flight . price )"), "select avg ( flight.price )");
        assert_eq!(post("select * from t"), "select * from t");
        assert_eq!(post("budget _ in _ billions"), "budget_in_billions");
        assert_eq!(post("a _ _ b"), "a__b");
        assert_eq!(post("count(head . *)"), "count(head.*)");
    }

    #[test]
    fn idempotent_on_examples() {
        for q in [
            "select avg ( flight.price ) where flight.origin = 'New York'",
            "a__b",
            "x = 3.5 and t1.c_d = 'q'",
        ] {
            let once = pre(q);
            assert_eq!(pre(&once), once);
            assert_eq!(preprocess_schema(&preprocess_schema(q)), preprocess_schema(q));
        }
    }

    #[test]
    fn keyword_map_validation() {
        assert!(KeywordMap::new([("avg", "average"), ("mean", "average")]).is_err());
        assert!(KeywordMap::new([("avg", "average"), ("average", "mean")]).is_err());
        assert!(KeywordMap::new([("avg", "average"), ("avg", "mean")]).is_err());
        let m = KeywordMap::from_tsv("# custom\navg\taverage\ncnt\tcount\n").unwrap();
        assert_eq!(m.pairs().len(), 2);
        assert!(KeywordMap::from_tsv("avg average").is_err());
        assert_eq!(
            preprocess_sql("select cnt(x)", &m).unwrap(),
            "select count(x)"
        );
    }

    #[test]
    fn unicode_identifiers_pass_through() {
        assert_eq!(pre("select größe_kg from städte"), "select größe _ kg from städte");
        assert_eq!(post("select größe _ kg from städte"), "select größe_kg from städte");
    }
}
