//! Line-oriented input and output helpers.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Read a whole file, or stdin for `-`.
pub fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Lines of `path` with 1-based line numbers.
pub fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(path).with_context(|| format!("reading {}", path.display()))?))
    };
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

/// One input line: plain text, or a JSON object whose `field` holds the
/// text. Plain lines need no `field`.
pub enum Record {
    Plain(String),
    Json(Value),
}

impl Record {
    pub fn parse(line: &str, field: Option<&str>, lineno: usize) -> Result<Record> {
        let Some(field) = field else {
            return Ok(Record::Plain(line.to_string()));
        };
        let v: Value = serde_json::from_str(line).with_context(|| format!("line {lineno}: invalid JSON"))?;
        match v.get(field) {
            Some(Value::String(_)) => Ok(Record::Json(v)),
            _ => bail!("line {lineno}: no string field `{field}`"),
        }
    }

    pub fn text<'a>(&'a self, field: Option<&str>) -> &'a str {
        match (self, field) {
            (Record::Plain(s), _) => s,
            (Record::Json(v), Some(f)) => v[f].as_str().unwrap_or_default(),
            (Record::Json(_), None) => "",
        }
    }

    /// The record with its text replaced.
    pub fn with_text(self, field: Option<&str>, text: String) -> String {
        match (self, field) {
            (Record::Json(mut v), Some(f)) => {
                v[f] = Value::String(text);
                v.to_string()
            }
            _ => text,
        }
    }
}

/// Replace tabs and newlines so a value fits in one TSV cell.
pub fn tsv_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}
