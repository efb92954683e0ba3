//! Semantic-boundary tooling for text-to-SQL corpora.
//!
//! - [`preprocess`]: rewrite schema text and SQL so subword tokenizers split
//!   it at word boundaries, and invert the rewrite.
//! - [`marker`]: wrap aligned NL/query components in `[sepN]`/`[/sepN]`.
//! - [`subword`]: simulate subword tokenization and audit boundary
//!   violations.
//! - [`corpus`] and [`serialize`]: load Spider-format data and build model
//!   inputs with grounded cell values.
//! - [`eval`]: exact-match and execution-match scoring.

pub mod corpus;
pub mod eval;
pub mod marker;
pub mod preprocess;
pub mod serialize;
pub mod span;
pub mod subword;

pub use corpus::{ColumnRef, ColumnType, ParallelExample, SchemaDb};
pub use eval::{evaluate_corpus, exact_match, execution_match, parse_sql, EvalConfig, EvalOutcome, SqlAst};
pub use marker::{mark_pair, strip_markers, validate_markers, ComponentAlignment};
pub use preprocess::{postprocess_sql, preprocess_schema, preprocess_sql, KeywordMap};
pub use serialize::{build_model_pair, ground_values, serialize_input, PairOptions};
pub use span::Span;
pub use subword::{audit, augment_vocab, SubwordVocabulary};
