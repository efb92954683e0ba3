//! Component boundary markers: `[sepN] ... [/sepN]` pairs wrapped around
//! aligned segments of an NL input and its query.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentAlignment {
    pub index: usize,
    pub nl_segments: Vec<Span>,
    #[serde(default)]
    pub out_segments: Vec<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Nl,
    Out,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Nl => "NL",
            Side::Out => "output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkError {
    #[error("{side} segments of components {first} and {second} overlap")]
    Overlap { side: Side, first: usize, second: usize },
    #[error("component indices must be consecutive from 0; expected {expected}, found {found}")]
    IndexGap { expected: usize, found: usize },
    #[error("component {index} starts before component {previous} in the NL input")]
    IndexOrder { index: usize, previous: usize },
    #[error("component {0} has no NL segment")]
    EmptyNl(usize),
    #[error("{side} span {span:?} of component {index} is outside the text")]
    OutOfBounds { side: Side, index: usize, span: Span },
}

pub fn open_marker(index: usize) -> String {
    format!("[sep{index}]")
}

pub fn close_marker(index: usize) -> String {
    format!("[/sep{index}]")
}

/// Every marker string for indices `0..count`.
pub fn marker_tokens(count: usize) -> Vec<String> {
    (0..count)
        .flat_map(|i| [open_marker(i), close_marker(i)])
        .collect()
}

fn check_side(
    text: &str,
    side: Side,
    alignments: &[ComponentAlignment],
    pick: impl Fn(&ComponentAlignment) -> &[Span],
) -> Result<Vec<(usize, Span)>, MarkError> {
    let mut segs = Vec::new();
    for a in alignments {
        for &span in pick(a) {
            let ok = span.start <= span.end
                && span.end <= text.len()
                && text.is_char_boundary(span.start)
                && text.is_char_boundary(span.end);
            if !ok {
                return Err(MarkError::OutOfBounds {
                    side,
                    index: a.index,
                    span,
                });
            }
            segs.push((a.index, span));
        }
    }
    segs.sort_by_key(|(i, s)| (s.start, s.end, *i));
    for w in segs.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.1.end > b.1.start {
            return Err(MarkError::Overlap {
                side,
                first: a.0,
                second: b.0,
            });
        }
    }
    Ok(segs)
}

/// `(component index, span)` pairs in text order.
pub type Segments = Vec<(usize, Span)>;

/// Check the alignment invariants and return the sorted segments per side.
pub fn validate_alignments(
    nl: &str,
    out: &str,
    alignments: &[ComponentAlignment],
) -> Result<(Segments, Segments), MarkError> {
    let mut sorted: Vec<&ComponentAlignment> = alignments.iter().collect();
    sorted.sort_by_key(|a| a.index);
    for (expected, a) in sorted.iter().enumerate() {
        if a.index != expected {
            return Err(MarkError::IndexGap {
                expected,
                found: a.index,
            });
        }
        if a.nl_segments.is_empty() {
            return Err(MarkError::EmptyNl(a.index));
        }
    }
    let first_start = |a: &ComponentAlignment| a.nl_segments.iter().map(|s| s.start).min().unwrap();
    for w in sorted.windows(2) {
        if first_start(w[1]) < first_start(w[0]) {
            return Err(MarkError::IndexOrder {
                index: w[1].index,
                previous: w[0].index,
            });
        }
    }
    let nl_segs = check_side(nl, Side::Nl, alignments, |a| &a.nl_segments)?;
    let out_segs = check_side(out, Side::Out, alignments, |a| &a.out_segments)?;
    Ok((nl_segs, out_segs))
}

fn render(text: &str, segments: &[(usize, Span)]) -> String {
    if segments.is_empty() {
        return text.to_string();
    }
    let mut pieces: Vec<String> = Vec::with_capacity(segments.len() * 2 + 1);
    let mut pos = 0;
    for &(index, span) in segments {
        let gap = text[pos..span.start].trim();
        if !gap.is_empty() {
            pieces.push(gap.to_string());
        }
        let body = span.slice(text).trim();
        if body.is_empty() {
            pieces.push(format!("{} {}", open_marker(index), close_marker(index)));
        } else {
            pieces.push(format!("{} {} {}", open_marker(index), body, close_marker(index)));
        }
        pos = span.end;
    }
    let tail = text[pos..].trim();
    if !tail.is_empty() {
        pieces.push(tail.to_string());
    }
    pieces.join(" ")
}

/// Wrap every aligned segment in its component's marker pair. A component
/// with several segments on one side gets the same pair around each.
pub fn mark_pair(
    nl: &str,
    out: &str,
    alignments: &[ComponentAlignment],
) -> Result<(String, String), MarkError> {
    let (nl_segs, out_segs) = validate_alignments(nl, out, alignments)?;
    Ok((render(nl, &nl_segs), render(out, &out_segs)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkerIssue {
    /// An opener with no closer.
    Unclosed { index: usize },
    /// A closer with no opener.
    StrayCloser { index: usize },
    /// A closer whose index differs from the innermost open marker.
    Mismatched { open: usize, close: usize },
    /// An opener while another pair is still open.
    Nested { outer: usize, inner: usize },
    /// A new index appeared out of first-appearance order.
    IndexOrder { expected: usize, found: usize },
}

impl MarkerIssue {
    fn is_structural(&self) -> bool {
        !matches!(self, MarkerIssue::IndexOrder { .. })
    }
}

impl fmt::Display for MarkerIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerIssue::Unclosed { index } => write!(f, "[sep{index}] is never closed"),
            MarkerIssue::StrayCloser { index } => write!(f, "[/sep{index}] has no opener"),
            MarkerIssue::Mismatched { open, close } => {
                write!(f, "[sep{open}] closed by [/sep{close}]")
            }
            MarkerIssue::Nested { outer, inner } => {
                write!(f, "[sep{inner}] opened inside [sep{outer}]")
            }
            MarkerIssue::IndexOrder { expected, found } => {
                write!(f, "index {found} appears where {expected} was expected")
            }
        }
    }
}

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(/?)sep(\d+)\]").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Open(usize),
    Close(usize),
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for cap in MARKER.captures_iter(text) {
        let m = cap.get(0).unwrap();
        // Indices too large for usize are left as plain text.
        let Ok(index) = cap[2].parse::<usize>() else {
            continue;
        };
        if m.start() > pos {
            out.push(Piece::Text(&text[pos..m.start()]));
        }
        out.push(if cap[1].is_empty() {
            Piece::Open(index)
        } else {
            Piece::Close(index)
        });
        pos = m.end();
    }
    if pos < text.len() {
        out.push(Piece::Text(&text[pos..]));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stripped {
    pub plain: String,
    pub segments: Vec<(usize, Span)>,
    pub diagnostics: Vec<MarkerIssue>,
}

/// Remove all markers, normalising whitespace to single spaces. Malformed
/// markers are dropped and reported rather than rejected.
pub fn strip_markers(text: &str) -> Stripped {
    let mut plain = String::with_capacity(text.len());
    let mut segments = Vec::new();
    let mut diagnostics = Vec::new();
    // (index, byte offset in `plain` where the segment's first word starts)
    let mut open: Option<(usize, Option<usize>)> = None;

    for piece in pieces(text) {
        match piece {
            Piece::Text(t) => {
                for word in t.split_whitespace() {
                    if !plain.is_empty() {
                        plain.push(' ');
                    }
                    if let Some((_, start @ None)) = &mut open {
                        *start = Some(plain.len());
                    }
                    plain.push_str(word);
                }
            }
            Piece::Open(index) => {
                if let Some((outer, _)) = open {
                    diagnostics.push(MarkerIssue::Nested { outer, inner: index });
                }
                open = Some((index, None));
            }
            Piece::Close(index) => match open.take() {
                Some((o, start)) if o == index => {
                    let span = match start {
                        Some(s) => Span::new(s, plain.len()),
                        None => Span::new(plain.len(), plain.len()),
                    };
                    segments.push((index, span));
                }
                Some((o, _)) => diagnostics.push(MarkerIssue::Mismatched { open: o, close: index }),
                None => diagnostics.push(MarkerIssue::StrayCloser { index }),
            },
        }
    }
    if let Some((index, _)) = open {
        diagnostics.push(MarkerIssue::Unclosed { index });
    }
    Stripped {
        plain,
        segments,
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkerReport {
    pub balanced: bool,
    pub issues: Vec<MarkerIssue>,
}

/// Check pairing, nesting and first-appearance index order without
/// modifying the text.
pub fn validate_markers(text: &str) -> MarkerReport {
    let mut issues = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut next_new = 0;
    for piece in pieces(text) {
        match piece {
            Piece::Text(_) => {}
            Piece::Open(index) => {
                if seen.insert(index) {
                    if index != next_new {
                        issues.push(MarkerIssue::IndexOrder {
                            expected: next_new,
                            found: index,
                        });
                    }
                    while seen.contains(&next_new) {
                        next_new += 1;
                    }
                }
                if let Some(&outer) = stack.last() {
                    issues.push(MarkerIssue::Nested { outer, inner: index });
                }
                stack.push(index);
            }
            Piece::Close(index) => match stack.iter().rposition(|&i| i == index) {
                Some(pos) if pos + 1 == stack.len() => {
                    stack.pop();
                }
                Some(pos) => {
                    issues.push(MarkerIssue::Mismatched {
                        open: *stack.last().unwrap(),
                        close: index,
                    });
                    stack.remove(pos);
                }
                None => issues.push(MarkerIssue::StrayCloser { index }),
            },
        }
    }
    for index in stack {
        issues.push(MarkerIssue::Unclosed { index });
    }
    MarkerReport {
        balanced: !issues.iter().any(MarkerIssue::is_structural),
        issues,
    }
}
