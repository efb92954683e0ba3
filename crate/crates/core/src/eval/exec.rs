//! Execution match: run both queries on the database and compare results.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::Connection;

use super::lexer::has_top_level_order_by;
use super::EvalError;
use crate::corpus::{open_database, CorpusError};

/// Rows read per query before comparison stops looking further.
pub const MAX_RESULT_ROWS: usize = 100_000;

/// Column assignments tried before giving up on a permuted match.
const MAX_PERMUTATIONS: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Cell {
    Null,
    Int(i64),
    /// Non-integral reals, as `f64` bits with `-0.0` folded into `0.0`.
    Real(u64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn from_value(v: ValueRef<'_>) -> Cell {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Int(i),
            ValueRef::Real(r) => {
                if r.fract() == 0.0 && r.abs() < 9.0e15 {
                    Cell::Int(r as i64)
                } else {
                    Cell::Real(if r == 0.0 { 0.0f64.to_bits() } else { r.to_bits() })
                }
            }
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
        }
    }
}

pub(crate) type Rows = Vec<Vec<Cell>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub ex: bool,
    /// Why the prediction failed to run, when it did.
    pub error: Option<String>,
}

pub(crate) fn run_query(conn: &Connection, sql: &str, timeout: Duration) -> Result<Rows, String> {
    let deadline = Instant::now() + timeout;
    conn.progress_handler(1_000, Some(move || Instant::now() > deadline))
        .map_err(|e| e.to_string())?;
    let result = (|| {
        let mut stmt = conn.prepare(sql)?;
        let ncols = stmt.column_count();
        let mut rows = stmt.query([])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            if out.len() == MAX_RESULT_ROWS {
                break;
            }
            let mut cells = Vec::with_capacity(ncols);
            for i in 0..ncols {
                cells.push(Cell::from_value(row.get_ref(i)?));
            }
            out.push(cells);
        }
        Ok::<_, rusqlite::Error>(out)
    })();
    conn.progress_handler(0, None::<fn() -> bool>).map_err(|e| e.to_string())?;
    result.map_err(|e| match e {
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted => {
            format!("timed out after {timeout:?}")
        }
        e => e.to_string(),
    })
}

fn project(rows: &Rows, perm: &[usize]) -> Rows {
    rows.iter().map(|r| perm.iter().map(|&i| r[i].clone()).collect()).collect()
}

fn same_rows(pred: Rows, gold: &Rows, ordered: bool) -> bool {
    if ordered {
        return pred == *gold;
    }
    let mut p = pred;
    let mut g = gold.clone();
    p.sort();
    g.sort();
    p == g
}

fn sorted_column(rows: &Rows, i: usize) -> Vec<Cell> {
    let mut v: Vec<Cell> = rows.iter().map(|r| r[i].clone()).collect();
    v.sort();
    v
}

/// Compare result tables, allowing the prediction's columns to appear in any
/// order. Candidate column pairings must hold the same multiset of values.
pub(crate) fn results_match(pred: &Rows, gold: &Rows, ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    let Some(width) = gold.first().map(Vec::len) else {
        return true;
    };
    if pred[0].len() != width {
        return false;
    }
    let identity: Vec<usize> = (0..width).collect();
    if same_rows(pred.clone(), gold, ordered) {
        return true;
    }
    let gold_cols: Vec<Vec<Cell>> = (0..width).map(|i| sorted_column(gold, i)).collect();
    let pred_cols: Vec<Vec<Cell>> = (0..width).map(|i| sorted_column(pred, i)).collect();
    let candidates: Vec<Vec<usize>> = gold_cols
        .iter()
        .map(|g| (0..width).filter(|&j| pred_cols[j] == *g).collect())
        .collect();
    let mut perm = Vec::with_capacity(width);
    let mut used = vec![false; width];
    let mut budget = MAX_PERMUTATIONS;
    search(&candidates, &mut perm, &mut used, &mut budget, &mut |perm| {
        perm != identity.as_slice() && same_rows(project(pred, perm), gold, ordered)
    })
}

fn search(
    candidates: &[Vec<usize>],
    perm: &mut Vec<usize>,
    used: &mut [bool],
    budget: &mut usize,
    accept: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if perm.len() == candidates.len() {
        *budget = budget.saturating_sub(1);
        return accept(perm);
    }
    for &j in &candidates[perm.len()] {
        if used[j] || *budget == 0 {
            continue;
        }
        used[j] = true;
        perm.push(j);
        let found = search(candidates, perm, used, budget, accept);
        perm.pop();
        used[j] = false;
        if found {
            return true;
        }
    }
    false
}

/// Execute `pred` and `gold` on the database at `db_path` and compare the
/// results. Row order matters only when the gold query ends in ORDER BY.
pub fn execution_match(pred: &str, gold: &str, db_path: &Path, timeout: Duration) -> Result<ExecResult, EvalError> {
    let conn = open_database(db_path).map_err(|e| match e {
        CorpusError::MissingDatabase(p) => EvalError::MissingDatabase(p),
        e => EvalError::Environment(e.to_string()),
    })?;
    execution_match_on(&conn, pred, gold, timeout)
}

pub(crate) fn execution_match_on(
    conn: &Connection,
    pred: &str,
    gold: &str,
    timeout: Duration,
) -> Result<ExecResult, EvalError> {
    let gold_rows = run_query(conn, gold, timeout).map_err(|message| EvalError::GoldFailed { message })?;
    let pred_rows = match run_query(conn, pred, timeout) {
        Ok(rows) => rows,
        Err(message) => return Ok(ExecResult { ex: false, error: Some(message) }),
    };
    let ordered = has_top_level_order_by(gold);
    Ok(ExecResult {
        ex: results_match(&pred_rows, &gold_rows, ordered),
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[&[i64]]) -> Rows {
        v.iter().map(|r| r.iter().map(|&i| Cell::Int(i)).collect()).collect()
    }

    #[test]
    fn order_insensitive_unless_requested() {
        let a = rows(&[&[1], &[2]]);
        let b = rows(&[&[2], &[1]]);
        assert!(results_match(&a, &b, false));
        assert!(!results_match(&a, &b, true));
    }

    #[test]
    fn multiset_not_set() {
        assert!(!results_match(&rows(&[&[1], &[1]]), &rows(&[&[1], &[2]]), false));
        assert!(!results_match(&rows(&[&[1]]), &rows(&[&[1], &[1]]), false));
    }

    #[test]
    fn column_permutation() {
        let p = rows(&[&[1, 10], &[2, 20]]);
        let g = rows(&[&[10, 1], &[20, 2]]);
        assert!(results_match(&p, &g, false));
        assert!(results_match(&p, &g, true));
        let crossed = rows(&[&[10, 2], &[20, 1]]);
        assert!(!results_match(&p, &crossed, false));
    }

    #[test]
    fn reals_and_ints_compare_numerically() {
        assert_eq!(Cell::from_value(ValueRef::Real(3.0)), Cell::Int(3));
        assert_ne!(Cell::from_value(ValueRef::Real(3.5)), Cell::Int(3));
        assert_eq!(Cell::from_value(ValueRef::Real(-0.0)), Cell::from_value(ValueRef::Real(0.0)));
    }

    #[test]
    fn timeout_interrupts() {
        let conn = Connection::open_in_memory().unwrap();
        let slow = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT count(*) FROM c";
        let err = run_query(&conn, slow, Duration::from_millis(50)).unwrap_err();
        assert!(err.contains("timed out"), "{err}");
        assert_eq!(run_query(&conn, "select 1", Duration::from_secs(1)).unwrap(), rows(&[&[1]]));
    }
}
