//! Greedy longest-match subword tokenization over a fixed vocabulary, and an
//! audit that flags tokens cutting across semantic word boundaries.
//!
//! The tokenizer is a deterministic stand-in for production tokenizers: it
//! reproduces their surface conventions (`▁` word-start markers, `##`
//! continuation markers, or bare pieces) but not their scoring, so audits
//! against real model vocabularies are approximate.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{preprocess_sql, KeywordMap};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "convention", content = "marker", rename_all = "snake_case")]
pub enum Convention {
    /// Word-initial pieces carry a prefix marker (SentencePiece `▁`).
    WordStart(String),
    /// Non-initial pieces carry a prefix marker (WordPiece `##`).
    Continuation(String),
    None,
}

impl Convention {
    pub fn sentencepiece() -> Self {
        Convention::WordStart("\u{2581}".into())
    }

    pub fn wordpiece() -> Self {
        Convention::Continuation("##".into())
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid vocabulary header: {0}")]
    Header(String),
    #[error("invalid JSON vocabulary: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    tokens: HashSet<String>,
    specials: BTreeSet<String>,
    convention: Convention,
    max_chars: usize,
}

impl SubwordVocabulary {
    /// Build a vocabulary. Every character of every token is added as a
    /// single-character token, so tokenization can always fall back to
    /// characters.
    pub fn new<I, S>(tokens: I, convention: Convention) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = SubwordVocabulary {
            tokens: HashSet::new(),
            specials: BTreeSet::new(),
            convention,
            max_chars: 1,
        };
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    fn insert(&mut self, token: String) {
        if token.is_empty() {
            return;
        }
        for c in token.chars() {
            self.tokens.insert(c.to_string());
        }
        self.max_chars = self.max_chars.max(token.chars().count());
        self.tokens.insert(token);
    }

    pub fn convention(&self) -> &Convention {
        &self.convention
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn is_special(&self, token: &str) -> bool {
        self.specials.contains(token)
    }

    pub fn specials(&self) -> impl Iterator<Item = &str> {
        self.specials.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Parse a plain-text vocabulary: one token per line (anything after a
    /// tab is ignored), with an optional first line
    /// `#convention=<word_start|continuation|none> marker=<string>`.
    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines().peekable();
        let mut convention = Convention::None;
        if let Some(header) = lines.peek().and_then(|l| l.strip_prefix("#convention=")) {
            convention = parse_header(header)?;
            lines.next();
        }
        let tokens: Vec<String> = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split('\t').next().unwrap_or(l).to_string())
            .collect();
        Ok(Self::from_surface_tokens(tokens, convention))
    }

    /// Parse `{"vocab": {token: id, ...}, "metadata": {"convention": ..,
    /// "marker": .., "specials": [..]}}` or a bare `{token: id}` object.
    pub fn from_json(text: &str) -> Result<Self, VocabError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| VocabError::Json(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| VocabError::Json("expected a JSON object".into()))?;
        let (vocab, meta) = match obj.get("vocab").and_then(|v| v.as_object()) {
            Some(v) => (v, obj.get("metadata")),
            None => (obj, None),
        };
        let mut convention = Convention::None;
        let mut specials = Vec::new();
        if let Some(meta) = meta {
            let kind = meta.get("convention").and_then(|v| v.as_str()).unwrap_or("none");
            let marker = meta.get("marker").and_then(|v| v.as_str());
            convention = convention_from(kind, marker)?;
            if let Some(list) = meta.get("specials").and_then(|v| v.as_array()) {
                specials = list.iter().filter_map(|s| s.as_str().map(String::from)).collect();
            }
        }
        let v = Self::from_surface_tokens(vocab.keys().cloned().collect(), convention);
        Ok(augment_vocab(&v, &specials))
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let text = fs::read_to_string(path).map_err(|source| VocabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_text(&text)
        }
    }

    fn from_surface_tokens(tokens: Vec<String>, convention: Convention) -> Self {
        // Byte-level vocabularies spell a leading space as `Ġ`; words are
        // matched after whitespace splitting, so the glyph is dropped.
        let byte_level = convention == Convention::None;
        let normalized: Vec<String> = tokens
            .into_iter()
            .map(|t| match t.strip_prefix('\u{120}') {
                Some(rest) if byte_level && !rest.is_empty() => rest.to_string(),
                _ => t,
            })
            .collect();
        Self::new(normalized, convention)
    }

    /// Token strings for `text`. See [`SubwordVocabulary::detokenize`] for
    /// the inverse.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.pieces(text).into_iter().map(|p| p.surface).collect()
    }

    /// Reassemble text from tokens produced by [`SubwordVocabulary::tokenize`].
    /// Exact for any input that does not itself contain the convention's
    /// marker string.
    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let mut out = String::new();
        match &self.convention {
            Convention::None => {
                for t in tokens {
                    out.push_str(t.as_ref());
                }
            }
            Convention::WordStart(m) => {
                for t in tokens {
                    let t = t.as_ref();
                    if self.is_special(t) {
                        out.push_str(t);
                    } else {
                        out.push_str(&t.replace(m.as_str(), " "));
                    }
                }
                if !out.is_empty() {
                    out.remove(0);
                }
            }
            Convention::Continuation(m) => {
                let mut prev_ordinary = false;
                for t in tokens {
                    let t = t.as_ref();
                    if self.is_special(t) || t.chars().all(char::is_whitespace) {
                        out.push_str(t);
                        prev_ordinary = false;
                    } else if let Some(rest) = t.strip_prefix(m.as_str()).filter(|r| !r.is_empty()) {
                        out.push_str(rest);
                        prev_ordinary = true;
                    } else {
                        if prev_ordinary {
                            out.push(' ');
                        }
                        out.push_str(t);
                        prev_ordinary = true;
                    }
                }
            }
        }
        out
    }

    fn special_at(&self, text: &str, pos: usize) -> Option<usize> {
        let rest = &text[pos..];
        self.specials
            .iter()
            .filter(|s| rest.starts_with(s.as_str()))
            .map(String::len)
            .max()
    }

    fn segments(&self, text: &str) -> Vec<Seg> {
        let mut segs = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            if let Some(len) = self.special_at(text, pos) {
                segs.push(Seg::Special(Span::new(pos, pos + len)));
                pos += len;
                continue;
            }
            let ws = text[pos..].chars().next().unwrap().is_whitespace();
            let start = pos;
            for c in text[start..].chars() {
                if c.is_whitespace() != ws || (pos > start && self.special_at(text, pos).is_some()) {
                    break;
                }
                pos += c.len_utf8();
            }
            let span = Span::new(start, pos);
            if ws {
                segs.push(Seg::Ws(span));
            } else {
                let initial = matches!(segs.last(), None | Some(Seg::Ws(_)));
                segs.push(Seg::Word { span, initial });
            }
        }
        segs
    }

    /// Longest piece of `word` starting at byte `at` such that
    /// `prefix + piece` is a token; returns its byte length.
    fn longest(&self, word: &str, at: usize, prefix: &str) -> Option<usize> {
        let ends: Vec<usize> = word[at..]
            .char_indices()
            .map(|(i, c)| at + i + c.len_utf8())
            .take(self.max_chars)
            .collect();
        let mut key = String::with_capacity(prefix.len() + word.len());
        ends.into_iter().rev().find(|&end| {
            key.clear();
            key.push_str(prefix);
            key.push_str(&word[at..end]);
            self.tokens.contains(&key)
        }).map(|end| end - at)
    }

    /// Greedy left-to-right matching of one word. `first` is the prefix for
    /// the first piece, `rest` the prefix for the others.
    fn split_word(&self, text: &str, span: Span, first: &str, rest: &str, out: &mut Vec<Piece>) {
        let word = span.slice(text);
        let mut at = 0;
        let mut prefix = first;
        while at < word.len() {
            let len = match self.longest(word, at, prefix) {
                Some(len) => len,
                None if !prefix.is_empty() && prefix == first && first != rest => {
                    // A word-start marker with no matching piece stands alone.
                    out.push(Piece::new(prefix, Span::new(span.start + at, span.start + at)));
                    prefix = rest;
                    continue;
                }
                None => word[at..].chars().next().unwrap().len_utf8(),
            };
            let piece = &word[at..at + len];
            out.push(Piece::new(
                &format!("{prefix}{piece}"),
                Span::new(span.start + at, span.start + at + len),
            ));
            at += len;
            prefix = rest;
        }
    }

    fn push_ws(&self, text: &str, span: Span, out: &mut Vec<Piece>) {
        let space = match &self.convention {
            Convention::WordStart(m) => m.as_str(),
            _ => " ",
        };
        for (i, c) in span.slice(text).char_indices() {
            let s = Span::new(span.start + i, span.start + i + c.len_utf8());
            if c == ' ' {
                out.push(Piece::new(space, s));
            } else {
                out.push(Piece::new(&c.to_string(), s));
            }
        }
    }

    /// Tokens with the byte span each one covers in `text`.
    pub fn pieces(&self, text: &str) -> Vec<Piece> {
        let segs = self.segments(text);
        let mut out = Vec::new();
        match &self.convention {
            Convention::None => {
                for seg in &segs {
                    match *seg {
                        Seg::Special(s) => out.push(Piece::new(s.slice(text), s)),
                        Seg::Ws(s) => self.push_ws(text, s, &mut out),
                        Seg::Word { span, .. } => self.split_word(text, span, "", "", &mut out),
                    }
                }
            }
            Convention::WordStart(m) => {
                if !matches!(segs.first(), None | Some(Seg::Word { .. })) {
                    out.push(Piece::new(m, Span::new(0, 0)));
                }
                for (i, seg) in segs.iter().enumerate() {
                    match *seg {
                        Seg::Special(s) => out.push(Piece::new(s.slice(text), s)),
                        Seg::Ws(s) => {
                            let consumed = text[s.range()].ends_with(' ')
                                && matches!(segs.get(i + 1), Some(Seg::Word { .. }));
                            let s = if consumed { Span::new(s.start, s.end - 1) } else { s };
                            self.push_ws(text, s, &mut out);
                        }
                        Seg::Word { span, initial } => {
                            let marked = initial
                                && match i.checked_sub(1).map(|p| &segs[p]) {
                                    None => true,
                                    Some(Seg::Ws(w)) => text[w.range()].ends_with(' '),
                                    Some(_) => false,
                                };
                            let first = if marked { m.as_str() } else { "" };
                            self.split_word(text, span, first, "", &mut out);
                        }
                    }
                }
            }
            Convention::Continuation(m) => {
                for (i, seg) in segs.iter().enumerate() {
                    match *seg {
                        Seg::Special(s) => out.push(Piece::new(s.slice(text), s)),
                        Seg::Ws(s) => {
                            let implied = s.slice(text) == " "
                                && i > 0
                                && matches!(segs[i - 1], Seg::Word { .. })
                                && matches!(segs.get(i + 1), Some(Seg::Word { .. }));
                            if !implied {
                                self.push_ws(text, s, &mut out);
                            }
                        }
                        Seg::Word { span, initial } => {
                            let first = if initial { "" } else { m.as_str() };
                            self.split_word(text, span, first, m, &mut out);
                        }
                    }
                }
            }
        }
        out
    }
}

fn convention_from(kind: &str, marker: Option<&str>) -> Result<Convention, VocabError> {
    match kind {
        "word_start" => Ok(Convention::WordStart(marker.unwrap_or("\u{2581}").to_string())),
        "continuation" => Ok(Convention::Continuation(marker.unwrap_or("##").to_string())),
        "none" => Ok(Convention::None),
        other => Err(VocabError::Header(format!("unknown convention `{other}`"))),
    }
}

fn parse_header(header: &str) -> Result<Convention, VocabError> {
    let mut parts = header.split_whitespace();
    let kind = parts.next().unwrap_or("none");
    let mut marker = None;
    for p in parts {
        match p.strip_prefix("marker=") {
            Some(m) if !m.is_empty() => marker = Some(m),
            _ => return Err(VocabError::Header(format!("unexpected `{p}`"))),
        }
    }
    convention_from(kind, marker)
}

#[derive(Debug, Clone, Copy)]
enum Seg {
    Special(Span),
    Ws(Span),
    Word { span: Span, initial: bool },
}

/// One output token and the span of source text it stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub surface: String,
    pub span: Span,
}

impl Piece {
    fn new(surface: &str, span: Span) -> Self {
        Piece {
            surface: surface.to_string(),
            span,
        }
    }
}

/// Return a copy of `vocab` with `new_tokens` added and registered as
/// specials, which always tokenize atomically.
pub fn augment_vocab<S: AsRef<str>>(vocab: &SubwordVocabulary, new_tokens: &[S]) -> SubwordVocabulary {
    let mut v = vocab.clone();
    for t in new_tokens {
        let t = t.as_ref();
        if t.is_empty() {
            continue;
        }
        v.insert(t.to_string());
        v.specials.insert(t.to_string());
    }
    v
}

/// Split text into minimal meaningful units: alphanumeric runs broken at
/// lower-to-upper case transitions, with every other non-space character
/// as a unit of its own.
pub fn segment_semantic_units(text: &str) -> Vec<Span> {
    let mut units = Vec::new();
    let mut run: Option<(usize, char)> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            match run {
                Some((start, prev)) if !(prev.is_lowercase() && c.is_uppercase()) => {
                    run = Some((start, c));
                }
                Some((start, _)) => {
                    units.push(Span::new(start, i));
                    run = Some((i, c));
                }
                None => run = Some((i, c)),
            }
            continue;
        }
        if let Some((start, _)) = run.take() {
            units.push(Span::new(start, i));
        }
        if !c.is_whitespace() {
            units.push(Span::new(i, i + c.len_utf8()));
        }
    }
    if let Some((start, _)) = run {
        units.push(Span::new(start, text.len()));
    }
    units
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenAudit {
    pub text: String,
    pub tokens: Vec<String>,
    pub units: Vec<Span>,
    /// Indices into `tokens`.
    pub violations: Vec<usize>,
    pub resolvable: bool,
}

fn violations(pieces: &[Piece], units: &[Span], text: &str, keywords: &KeywordMap) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, p) in pieces.iter().enumerate() {
        if p.span.is_empty() {
            continue;
        }
        let touched: Vec<&Span> = units.iter().filter(|u| u.overlaps(&p.span)).collect();
        let fragmenting_keyword = match touched.as_slice() {
            [u] => {
                **u != p.span
                    && keywords.is_abbreviation(u.slice(text))
                    && pieces.iter().filter(|q| !q.span.is_empty() && q.span.overlaps(u)).count() > 1
            }
            _ => false,
        };
        if touched.len() >= 2 || fragmenting_keyword {
            out.push(i);
        }
    }
    out
}

/// Audit with the default keyword map.
pub fn audit(text: &str, vocab: &SubwordVocabulary) -> TokenAudit {
    audit_with(text, vocab, &KeywordMap::default())
}

/// A token is a violation when it overlaps two or more semantic units, or
/// when it is one of several fragments of an abbreviated keyword the
/// preprocessing would spell out. `resolvable` holds when the preprocessed
/// text has no violations.
pub fn audit_with(text: &str, vocab: &SubwordVocabulary, keywords: &KeywordMap) -> TokenAudit {
    let pieces = vocab.pieces(text);
    let units = segment_semantic_units(text);
    let violations = violations(&pieces, &units, text, keywords);
    let resolvable = match preprocess_sql(text, keywords) {
        Ok(pre) => {
            let p = vocab.pieces(&pre);
            violations_count(&p, &pre, keywords) == 0
        }
        Err(_) => false,
    };
    TokenAudit {
        text: text.to_string(),
        tokens: pieces.into_iter().map(|p| p.surface).collect(),
        units,
        violations,
        resolvable,
    }
}

fn violations_count(pieces: &[Piece], text: &str, keywords: &KeywordMap) -> usize {
    violations(pieces, &segment_semantic_units(text), text, keywords).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusAudit {
    pub texts: usize,
    pub total_violations: usize,
    pub texts_with_violations: usize,
    /// Texts with at least one violation whose preprocessed form has none.
    pub resolvable_texts: usize,
    /// Violations inside resolvable texts.
    pub resolvable_violations: usize,
    pub audits: Vec<TokenAudit>,
}

impl CorpusAudit {
    pub fn resolvable_fraction(&self) -> f64 {
        if self.total_violations == 0 {
            0.0
        } else {
            self.resolvable_violations as f64 / self.total_violations as f64
        }
    }
}

pub fn audit_corpus<S: AsRef<str> + Sync>(
    texts: &[S],
    vocab: &SubwordVocabulary,
    keywords: &KeywordMap,
) -> CorpusAudit {
    let audits: Vec<TokenAudit> = texts
        .par_iter()
        .map(|t| audit_with(t.as_ref(), vocab, keywords))
        .collect();
    let flagged = audits.iter().filter(|a| !a.violations.is_empty());
    CorpusAudit {
        texts: audits.len(),
        total_violations: audits.iter().map(|a| a.violations.len()).sum(),
        texts_with_violations: flagged.clone().count(),
        resolvable_texts: flagged.clone().filter(|a| a.resolvable).count(),
        resolvable_violations: flagged.filter(|a| a.resolvable).map(|a| a.violations.len()).sum(),
        audits,
    }
}
