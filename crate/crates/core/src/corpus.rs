//! Loading Spider-format corpora: schema files, example files, component
//! annotations and the SQLite databases that hold cell contents.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marker::ComponentAlignment;
use crate::span::Span;

/// Upper bound on distinct values indexed per column.
pub const CONTENT_INDEX_CAP: usize = 5_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: malformed input at byte {offset}: {message}")]
    Parse {
        source_name: String,
        offset: usize,
        message: String,
    },
    #[error("database `{db_id}`: {message}")]
    Validation { db_id: String, message: String },
    #[error("example {index}: unknown db_id `{db_id}`")]
    UnknownDb { index: usize, db_id: String },
    #[error("annotation for example {example}: {message}")]
    Alignment { example: usize, message: String },
    #[error("database file {0} does not exist")]
    MissingDatabase(PathBuf),
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    fn from_spider(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "text" => ColumnType::Text,
            "number" => ColumnType::Number,
            "time" => ColumnType::Time,
            "boolean" => ColumnType::Boolean,
            _ => ColumnType::Others,
        }
    }

    fn as_spider(&self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Number => "number",
            ColumnType::Time => "time",
            ColumnType::Boolean => "boolean",
            ColumnType::Others => "others",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

/// A (table, column) pair addressed by position in the owning [`SchemaDb`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: usize,
    pub column: usize,
}

impl ColumnRef {
    pub fn new(table: usize, column: usize) -> Self {
        ColumnRef { table, column }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDb {
    pub db_id: String,
    pub tables: Vec<Table>,
    pub primary_keys: Vec<ColumnRef>,
    pub foreign_keys: Vec<(ColumnRef, ColumnRef)>,
    /// Distinct cell values per column, lexicographically sorted. Filled on
    /// demand by [`SchemaDb::ensure_contents`].
    #[serde(default)]
    pub content_index: BTreeMap<ColumnRef, Vec<String>>,
    #[serde(skip)]
    contents_loaded: bool,
}

impl SchemaDb {
    pub fn new(db_id: impl Into<String>, tables: Vec<Table>) -> Self {
        SchemaDb {
            db_id: db_id.into(),
            tables,
            primary_keys: Vec::new(),
            foreign_keys: Vec::new(),
            content_index: BTreeMap::new(),
            contents_loaded: false,
        }
    }

    /// Convenience constructor for fixtures: every column typed as text.
    pub fn from_names(db_id: &str, tables: &[(&str, &[&str])]) -> Self {
        let tables = tables
            .iter()
            .map(|(name, cols)| Table {
                name: name.to_string(),
                columns: cols
                    .iter()
                    .map(|c| Column {
                        name: c.to_string(),
                        ty: ColumnType::Text,
                    })
                    .collect(),
            })
            .collect();
        SchemaDb::new(db_id, tables)
    }

    pub fn column(&self, c: ColumnRef) -> Option<&Column> {
        self.tables.get(c.table)?.columns.get(c.column)
    }

    pub fn contains(&self, c: ColumnRef) -> bool {
        self.column(c).is_some()
    }

    /// Case-insensitive table lookup.
    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables
            .iter()
            .position(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Case-insensitive column lookup within one table.
    pub fn column_index(&self, table: usize, name: &str) -> Option<usize> {
        self.tables
            .get(table)?
            .columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column_refs(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.tables.iter().enumerate().flat_map(|(t, table)| {
            (0..table.columns.len()).map(move |c| ColumnRef::new(t, c))
        })
    }

    /// `table.column` display name.
    pub fn qualified_name(&self, c: ColumnRef) -> String {
        match self.column(c) {
            Some(col) => format!("{}.{}", self.tables[c.table].name, col.name),
            None => format!("<invalid {}:{}>", c.table, c.column),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| CorpusError::Validation {
            db_id: self.db_id.clone(),
            message,
        };
        let mut seen = HashSet::new();
        for t in &self.tables {
            if !seen.insert(t.name.as_str()) {
                return Err(fail(format!("duplicate table name `{}`", t.name)));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.as_str()) {
                    return Err(fail(format!(
                        "duplicate column `{}` in table `{}`",
                        c.name, t.name
                    )));
                }
            }
        }
        for pk in &self.primary_keys {
            if !self.contains(*pk) {
                return Err(fail(format!("primary key {pk:?} references no column")));
            }
        }
        for (a, b) in &self.foreign_keys {
            if !self.contains(*a) || !self.contains(*b) {
                return Err(fail(format!(
                    "foreign key {a:?} -> {b:?} references no column"
                )));
            }
        }
        for c in self.content_index.keys() {
            if !self.contains(*c) {
                return Err(fail(format!("content index entry {c:?} is not a column")));
            }
        }
        Ok(())
    }

    pub fn contents_loaded(&self) -> bool {
        self.contents_loaded
    }

    /// Index the distinct values of every text column from the database file,
    /// at most [`CONTENT_INDEX_CAP`] per column. A second call is a no-op.
    pub fn ensure_contents(&mut self, db_path: &Path) -> Result<()> {
        if self.contents_loaded {
            return Ok(());
        }
        let conn = open_database(db_path)?;
        let mut index = BTreeMap::new();
        for c in self.column_refs().collect::<Vec<_>>() {
            if self.column(c).map(|col| col.ty) != Some(ColumnType::Text) {
                continue;
            }
            let values = distinct_values(&conn, self, c, CONTENT_INDEX_CAP)?;
            if !values.is_empty() {
                index.insert(c, values);
            }
        }
        self.content_index = index;
        self.contents_loaded = true;
        Ok(())
    }
}

/// `<db_root>/<db_id>/<db_id>.sqlite`, the Spider distribution layout.
pub fn database_path(db_root: &Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelExample {
    pub question: String,
    pub target: String,
    pub db_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignments: Option<Vec<ComponentAlignment>>,
}

impl ParallelExample {
    pub fn new(question: &str, target: &str, db_id: &str) -> Self {
        ParallelExample {
            question: question.to_string(),
            target: target.to_string(),
            db_id: db_id.to_string(),
            alignments: None,
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_error(source_name: &str, text: &str, err: serde_json::Error) -> CorpusError {
    // serde_json reports 1-based line/column; convert to a byte offset.
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == err.line() {
            offset += err.column().saturating_sub(1).min(line.len());
            break;
        }
        offset += line.len();
    }
    CorpusError::Parse {
        source_name: source_name.to_string(),
        offset: offset.min(text.len()),
        message: err.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KeyEntry {
    Single(i64),
    Composite(Vec<i64>),
}

#[derive(Deserialize)]
struct RawSchema {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<KeyEntry>,
    #[serde(default)]
    foreign_keys: Vec<(i64, i64)>,
}

impl RawSchema {
    fn into_schema(self) -> Result<SchemaDb> {
        let fail = |message: String| CorpusError::Validation {
            db_id: self.db_id.clone(),
            message,
        };
        if self.column_types.len() != self.column_names_original.len() {
            return Err(fail(format!(
                "{} column types for {} columns",
                self.column_types.len(),
                self.column_names_original.len()
            )));
        }
        let mut tables: Vec<Table> = self
            .table_names_original
            .iter()
            .map(|n| Table {
                name: n.clone(),
                columns: Vec::new(),
            })
            .collect();
        // Global Spider column index -> ColumnRef; index of `*` maps to None.
        let mut global = Vec::with_capacity(self.column_names_original.len());
        for ((table, name), ty) in self.column_names_original.iter().zip(&self.column_types) {
            if *table < 0 {
                global.push(None);
                continue;
            }
            let t = *table as usize;
            let Some(tbl) = tables.get_mut(t) else {
                return Err(fail(format!(
                    "column `{name}` belongs to table index {t}, which does not exist"
                )));
            };
            tbl.columns.push(Column {
                name: name.clone(),
                ty: ColumnType::from_spider(ty),
            });
            global.push(Some(ColumnRef::new(t, tbl.columns.len() - 1)));
        }
        let lookup = |i: i64| -> Result<ColumnRef> {
            usize::try_from(i)
                .ok()
                .and_then(|i| global.get(i).copied().flatten())
                .ok_or_else(|| fail(format!("key references column index {i}, which does not exist")))
        };
        let mut primary_keys = Vec::new();
        for entry in &self.primary_keys {
            match entry {
                KeyEntry::Single(i) => primary_keys.push(lookup(*i)?),
                KeyEntry::Composite(v) => {
                    for i in v {
                        primary_keys.push(lookup(*i)?);
                    }
                }
            }
        }
        let foreign_keys = self
            .foreign_keys
            .iter()
            .map(|(a, b)| Ok((lookup(*a)?, lookup(*b)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut db = SchemaDb::new(self.db_id.clone(), tables);
        db.primary_keys = primary_keys;
        db.foreign_keys = foreign_keys;
        db.validate()?;
        Ok(db)
    }
}

/// Parse the contents of a Spider `tables.json` file.
pub fn parse_schemas(text: &str, source_name: &str) -> Result<Vec<SchemaDb>> {
    let raw: Vec<RawSchema> =
        serde_json::from_str(text).map_err(|e| json_error(source_name, text, e))?;
    raw.into_iter().map(RawSchema::into_schema).collect()
}

pub fn load_schemas(path: &Path) -> Result<Vec<SchemaDb>> {
    parse_schemas(&read_file(path)?, &path.display().to_string())
}

/// Render schemas back to the Spider `tables.json` layout.
pub fn schemas_to_json(schemas: &[SchemaDb]) -> serde_json::Value {
    let entries = schemas
        .iter()
        .map(|db| {
            let mut names = vec![serde_json::json!([-1, "*"])];
            let mut types = vec!["text"];
            let mut global = HashMap::new();
            for c in db.column_refs() {
                global.insert(c, names.len());
                let col = db.column(c).unwrap();
                names.push(serde_json::json!([c.table, col.name]));
                types.push(col.ty.as_spider());
            }
            serde_json::json!({
                "db_id": db.db_id,
                "table_names_original": db.tables.iter().map(|t| &t.name).collect::<Vec<_>>(),
                "table_names": db.tables.iter().map(|t| &t.name).collect::<Vec<_>>(),
                "column_names_original": names,
                "column_names": names,
                "column_types": types,
                "primary_keys": db.primary_keys.iter().map(|k| global[k]).collect::<Vec<_>>(),
                "foreign_keys": db.foreign_keys.iter().map(|(a, b)| [global[a], global[b]]).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::Value::Array(entries)
}

#[derive(Deserialize, Serialize)]
struct RawExample {
    question: String,
    query: String,
    db_id: String,
}

/// Parse a Spider train/dev style examples array without checking db ids.
pub fn read_examples(text: &str, source_name: &str) -> Result<Vec<ParallelExample>> {
    let raw: Vec<RawExample> =
        serde_json::from_str(text).map_err(|e| json_error(source_name, text, e))?;
    Ok(raw
        .into_iter()
        .map(|r| ParallelExample {
            question: r.question,
            target: r.query,
            db_id: r.db_id,
            alignments: None,
        })
        .collect())
}

/// Like [`read_examples`], rejecting db ids missing from `schemas`.
pub fn parse_examples(
    text: &str,
    source_name: &str,
    schemas: &[SchemaDb],
) -> Result<Vec<ParallelExample>> {
    let examples = read_examples(text, source_name)?;
    let known: HashSet<&str> = schemas.iter().map(|s| s.db_id.as_str()).collect();
    if let Some((index, e)) = examples.iter().enumerate().find(|(_, e)| !known.contains(e.db_id.as_str())) {
        return Err(CorpusError::UnknownDb {
            index,
            db_id: e.db_id.clone(),
        });
    }
    Ok(examples)
}

/// Load a Spider train/dev style examples file; unknown keys are ignored.
pub fn load_examples(path: &Path, schemas: &[SchemaDb]) -> Result<Vec<ParallelExample>> {
    parse_examples(&read_file(path)?, &path.display().to_string(), schemas)
}

pub fn examples_to_json(examples: &[ParallelExample]) -> String {
    let raw: Vec<RawExample> = examples
        .iter()
        .map(|e| RawExample {
            question: e.question.clone(),
            query: e.target.clone(),
            db_id: e.db_id.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&raw).expect("examples serialize")
}

pub fn write_examples(path: &Path, examples: &[ParallelExample]) -> Result<()> {
    fs::write(path, examples_to_json(examples)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Fragments {
    One(String),
    Many(Vec<String>),
}

impl Fragments {
    fn as_slice(&self) -> &[String] {
        match self {
            Fragments::One(s) => std::slice::from_ref(s),
            Fragments::Many(v) => v,
        }
    }
}

/// One component in an annotation file: NL fragment(s) and the output
/// fragment(s) they align with.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawComponent {
    pub nl: Fragments,
    #[serde(default)]
    pub out: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawAnnotation {
    pub example_index: usize,
    pub components: Vec<RawComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationDiagnostic {
    pub example_index: usize,
    pub message: String,
}

impl fmt::Display for AnnotationDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "example {}: {}", self.example_index, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Annotated {
    pub examples: Vec<ParallelExample>,
    pub diagnostics: Vec<AnnotationDiagnostic>,
}

/// Whitespace-free view of a string with a map back to original offsets.
struct Squeezed {
    text: String,
    start_of: Vec<usize>,
    end_of: Vec<usize>,
}

impl Squeezed {
    fn new(s: &str) -> Self {
        let mut text = String::with_capacity(s.len());
        let mut start_of = Vec::with_capacity(s.len());
        let mut end_of = Vec::with_capacity(s.len());
        for (i, ch) in s.char_indices() {
            if ch.is_whitespace() {
                continue;
            }
            text.push(ch);
            for _ in 0..ch.len_utf8() {
                start_of.push(i);
                end_of.push(i + ch.len_utf8());
            }
        }
        Squeezed {
            text,
            start_of,
            end_of,
        }
    }

    fn original(&self, start: usize, len: usize) -> Span {
        Span::new(self.start_of[start], self.end_of[start + len - 1])
    }

    /// Occurrences of `needle` starting at or after `from`, left to right.
    fn occurrences<'a>(&'a self, needle: &'a str, from: usize) -> impl Iterator<Item = usize> + 'a {
        let mut pos = from;
        std::iter::from_fn(move || {
            let found = pos + self.text.get(pos..)?.find(needle)?;
            let step = self.text[found..].chars().next().map_or(1, char::len_utf8);
            pos = found + step;
            Some(found)
        })
    }
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Convert one example's fragment list into character spans.
pub fn align_components(
    example_index: usize,
    question: &str,
    target: &str,
    components: &[RawComponent],
    diagnostics: &mut Vec<AnnotationDiagnostic>,
) -> Result<Vec<ComponentAlignment>> {
    let err = |message: String| CorpusError::Alignment {
        example: example_index,
        message,
    };
    let nl = Squeezed::new(question);
    let out = Squeezed::new(target);
    let mut cursor = 0;
    let mut bound: Vec<Span> = Vec::new();
    let mut alignments = Vec::with_capacity(components.len());

    for (index, comp) in components.iter().enumerate() {
        let mut nl_segments = Vec::new();
        for frag in comp.nl.as_slice() {
            let needle = squeeze(frag);
            if needle.is_empty() {
                return Err(err(format!("component {index} has an empty NL fragment")));
            }
            let Some(at) = nl.occurrences(&needle, cursor).next() else {
                return Err(err(format!(
                    "NL fragment {frag:?} not found in question {question:?}"
                )));
            };
            if at > cursor {
                let gap = nl.original(cursor, at - cursor);
                diagnostics.push(AnnotationDiagnostic {
                    example_index,
                    message: format!("question text {:?} is not covered by any component", gap.slice(question)),
                });
            }
            nl_segments.push(nl.original(at, needle.len()));
            cursor = at + needle.len();
        }

        let mut out_segments = Vec::new();
        for frag in &comp.out {
            let needle = squeeze(frag);
            if needle.is_empty() {
                return Err(err(format!("component {index} has an empty output fragment")));
            }
            let span = out
                .occurrences(&needle, 0)
                .map(|at| out.original(at, needle.len()))
                .find(|span| !bound.iter().any(|b| b.overlaps(span)))
                .ok_or_else(|| {
                    err(format!("output fragment {frag:?} not found in target {target:?}"))
                })?;
            bound.push(span);
            out_segments.push(span);
        }
        if out_segments.is_empty() {
            diagnostics.push(AnnotationDiagnostic {
                example_index,
                message: format!("component {index} has no output fragment; recorded as NL-only"),
            });
        }
        alignments.push(ComponentAlignment {
            index,
            nl_segments,
            out_segments,
        });
    }
    if cursor < nl.text.len() && !components.is_empty() {
        let gap = nl.original(cursor, nl.text.len() - cursor);
        diagnostics.push(AnnotationDiagnostic {
            example_index,
            message: format!("question text {:?} is not covered by any component", gap.slice(question)),
        });
    }
    Ok(alignments)
}

pub fn apply_annotations(
    annotations: &[RawAnnotation],
    mut examples: Vec<ParallelExample>,
) -> Result<Annotated> {
    let mut diagnostics = Vec::new();
    let mut seen = HashSet::new();
    for ann in annotations {
        let i = ann.example_index;
        if !seen.insert(i) {
            return Err(CorpusError::Alignment {
                example: i,
                message: "annotated more than once".into(),
            });
        }
        let Some(ex) = examples.get(i) else {
            return Err(CorpusError::Alignment {
                example: i,
                message: format!("index out of range ({} examples)", examples.len()),
            });
        };
        let alignments =
            align_components(i, &ex.question, &ex.target, &ann.components, &mut diagnostics)?;
        examples[i].alignments = Some(alignments);
    }
    Ok(Annotated {
        examples,
        diagnostics,
    })
}

pub fn parse_component_annotations(
    text: &str,
    source_name: &str,
    examples: Vec<ParallelExample>,
) -> Result<Annotated> {
    let raw: Vec<RawAnnotation> =
        serde_json::from_str(text).map_err(|e| json_error(source_name, text, e))?;
    apply_annotations(&raw, examples)
}

pub fn load_component_annotations(path: &Path, examples: Vec<ParallelExample>) -> Result<Annotated> {
    parse_component_annotations(&read_file(path)?, &path.display().to_string(), examples)
}

pub(crate) fn open_database(path: &Path) -> Result<Connection> {
    if !path.is_file() {
        return Err(CorpusError::MissingDatabase(path.to_path_buf()));
    }
    Ok(Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )?)
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn distinct_values(conn: &Connection, db: &SchemaDb, c: ColumnRef, k: usize) -> Result<Vec<String>> {
    let table = quote_ident(&db.tables[c.table].name);
    let column = quote_ident(&db.tables[c.table].columns[c.column].name);
    let sql = format!(
        "SELECT DISTINCT CAST({column} AS TEXT) FROM {table} WHERE {column} IS NOT NULL ORDER BY 1 LIMIT ?1"
    );
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([k as i64])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        match row.get_ref(0)? {
            ValueRef::Text(b) | ValueRef::Blob(b) => out.push(String::from_utf8_lossy(b).into_owned()),
            ValueRef::Integer(i) => out.push(i.to_string()),
            ValueRef::Real(f) => out.push(f.to_string()),
            ValueRef::Null => {}
        }
    }
    // Lossy decoding can collapse distinct byte strings.
    out.sort();
    out.dedup();
    out.truncate(k);
    Ok(out)
}

/// Up to `k` distinct values of `column`, in lexicographic order.
pub fn sample_column_contents(
    db: &SchemaDb,
    db_path: &Path,
    column: ColumnRef,
    k: usize,
) -> Result<Vec<String>> {
    if !db.contains(column) {
        return Err(CorpusError::Validation {
            db_id: db.db_id.clone(),
            message: format!("unknown column {column:?}"),
        });
    }
    let conn = open_database(db_path)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    distinct_values(&conn, db, column, k)
}
