//! Model input construction: question, database id and flattened schema,
//! with matched cell values attached to their columns.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{ColumnRef, ParallelExample, SchemaDb};
use crate::marker::{mark_pair, MarkError};
use crate::preprocess::{preprocess_schema, preprocess_sql, KeywordMap, PreprocessError};

pub const DEFAULT_GROUND_THRESHOLD: f64 = 0.85;
pub const MAX_GROUNDED_COLUMNS: usize = 3;
/// Cell values shorter than this after normalisation are never matched.
pub const MIN_VALUE_CHARS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grounding {
    pub column: ColumnRef,
    pub value: String,
    pub score: f64,
    /// Length in characters of the matched text.
    pub matched_chars: usize,
}

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_for_match(s: &str) -> String {
    let kept: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Length in characters of the longest common substring.
pub fn longest_common_substring(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in &a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Similarity of a question window and a cell value:
/// `lcs / max(len(window), len(value))` over normalised strings.
pub fn similarity(window: &str, value: &str) -> f64 {
    let (w, v) = (normalize_for_match(window), normalize_for_match(value));
    let longest = w.chars().count().max(v.chars().count());
    if longest == 0 {
        return 0.0;
    }
    longest_common_substring(&w, &v) as f64 / longest as f64
}

/// Best (score, matched chars) of `value` against any word window of the
/// question whose length is within one word of the value's.
fn match_value(question_words: &[&str], normalized_question: &str, value: &str) -> Option<(f64, usize)> {
    let v = normalize_for_match(value);
    let v_chars = v.chars().count();
    if v_chars < MIN_VALUE_CHARS {
        return None;
    }
    // Exact containment on word boundaries passes outright.
    if format!(" {normalized_question} ").contains(&format!(" {v} ")) {
        return Some((1.0, v_chars));
    }
    let n = v.split(' ').count();
    let mut best: Option<(f64, usize)> = None;
    for len in n.saturating_sub(1).max(1)..=n + 1 {
        for window in question_words.windows(len) {
            let w = window.join(" ");
            let lcs = longest_common_substring(&w, &v);
            let score = lcs as f64 / w.chars().count().max(v_chars) as f64;
            if best.is_none_or(|(s, l)| score > s || (score == s && lcs > l)) {
                best = Some((score, lcs));
            }
        }
    }
    best
}

/// Attach at most one value per column, keeping the
/// [`MAX_GROUNDED_COLUMNS`] longest matches, returned in schema order.
pub fn ground_values(question: &str, db: &SchemaDb, threshold: f64) -> Vec<Grounding> {
    let nq = normalize_for_match(question);
    let words: Vec<&str> = nq.split(' ').filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return Vec::new();
    }
    let mut per_column = Vec::new();
    for (&column, values) in &db.content_index {
        let mut best: Option<Grounding> = None;
        for value in values {
            let Some((score, matched)) = match_value(&words, &nq, value) else {
                continue;
            };
            if score < threshold {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    (score, matched, std::cmp::Reverse(value.as_str()))
                        > (b.score, b.matched_chars, std::cmp::Reverse(b.value.as_str()))
                }
            };
            if better {
                best = Some(Grounding {
                    column,
                    value: value.clone(),
                    score,
                    matched_chars: matched,
                });
            }
        }
        per_column.extend(best);
    }
    per_column.sort_by(|a, b| {
        b.matched_chars
            .cmp(&a.matched_chars)
            .then(b.score.total_cmp(&a.score))
            .then(a.column.cmp(&b.column))
    });
    per_column.truncate(MAX_GROUNDED_COLUMNS);
    per_column.sort_by_key(|g| g.column);
    per_column
}

/// `question | db_id | table : col , col ( value ) | table : ...`
pub fn serialize_input(question: &str, db: &SchemaDb, groundings: &[Grounding], preprocess: bool) -> String {
    serialize_with(question, db, groundings, preprocess, false)
}

fn serialize_with(
    question: &str,
    db: &SchemaDb,
    groundings: &[Grounding],
    preprocess: bool,
    preprocess_db_id: bool,
) -> String {
    let name = |s: &str| if preprocess { preprocess_schema(s) } else { s.to_string() };
    let mut out = String::new();
    out.push_str(question);
    out.push_str(" | ");
    if preprocess_db_id {
        out.push_str(&name(&db.db_id));
    } else {
        out.push_str(&db.db_id);
    }
    for (t, table) in db.tables.iter().enumerate() {
        out.push_str(" | ");
        out.push_str(&name(&table.name));
        out.push_str(" :");
        for (c, column) in table.columns.iter().enumerate() {
            out.push_str(if c == 0 { " " } else { " , " });
            out.push_str(&name(&column.name));
            if let Some(g) = groundings.iter().find(|g| g.column == ColumnRef::new(t, c)) {
                out.push_str(" ( ");
                out.push_str(&g.value);
                out.push_str(" )");
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOptions {
    pub preprocess: bool,
    pub mark: bool,
    pub ground: bool,
    pub ground_threshold: f64,
    /// Also space underscores in the database id. Off by default: the id
    /// names the database and is not a schema item.
    pub preprocess_db_id: bool,
    pub keywords: KeywordMap,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            preprocess: true,
            mark: true,
            ground: true,
            ground_threshold: DEFAULT_GROUND_THRESHOLD,
            preprocess_db_id: false,
            keywords: KeywordMap::default(),
        }
    }
}

impl PairOptions {
    pub fn plain() -> Self {
        PairOptions {
            preprocess: false,
            mark: false,
            ground: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum PairError {
    #[error("marking requested but the example has no component alignments")]
    MissingAlignments,
    #[error(transparent)]
    Mark(#[from] MarkError),
    #[error("target: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("example db_id `{example}` does not match schema `{schema}`")]
    WrongSchema { example: String, schema: String },
}

/// Build the (source, target) strings for one example. Marking runs first
/// so spans refer to the original text; the schema is never marked.
pub fn build_model_pair(
    example: &ParallelExample,
    db: &SchemaDb,
    options: &PairOptions,
) -> Result<(String, String), PairError> {
    if example.db_id != db.db_id {
        return Err(PairError::WrongSchema {
            example: example.db_id.clone(),
            schema: db.db_id.clone(),
        });
    }
    let (question, mut target) = if options.mark {
        let alignments = example.alignments.as_ref().ok_or(PairError::MissingAlignments)?;
        mark_pair(&example.question, &example.target, alignments)?
    } else {
        (example.question.clone(), example.target.clone())
    };
    if options.preprocess {
        target = preprocess_sql(&target, &options.keywords)?;
    }
    let groundings = if options.ground {
        ground_values(&example.question, db, options.ground_threshold)
    } else {
        Vec::new()
    };
    let source = serialize_with(&question, db, &groundings, options.preprocess, options.preprocess_db_id);
    Ok((source, target))
}
