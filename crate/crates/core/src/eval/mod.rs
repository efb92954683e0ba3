//! Exact-match and execution-match scoring of predicted SQL.
//!
//! Exact match parses both queries, resolves every column against the
//! schema, and compares clause by clause with set semantics everywhere but
//! ORDER BY. Execution match runs both queries on the SQLite database.

pub mod ast;
mod exec;
mod lexer;
mod parser;
mod resolve;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{database_path, open_database, SchemaDb};

pub use ast::SqlAst;
pub use exec::{execution_match, ExecResult, MAX_RESULT_ROWS};
pub use resolve::{canonicalize, mask_values, parse_resolved, parse_sql};

/// Failures to turn a query string into an [`SqlAst`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("resolution error: {0}")]
    Resolution(String),
}

/// Failures that stop an evaluation rather than scoring it as a miss.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("database file {0} does not exist")]
    MissingDatabase(PathBuf),
    #[error("cannot open database: {0}")]
    Environment(String),
    #[error("gold query failed to execute: {message}")]
    GoldFailed { message: String },
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    /// Compare literal values (and LIMIT counts). Off by default.
    pub compare_values: bool,
    /// Per-query execution budget.
    pub timeout: Duration,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            compare_values: false,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Select,
    From,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Limit,
    SetOp,
}

impl Clause {
    pub const ALL: [Clause; 8] = [
        Clause::Select,
        Clause::From,
        Clause::Where,
        Clause::GroupBy,
        Clause::Having,
        Clause::OrderBy,
        Clause::Limit,
        Clause::SetOp,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExOutcome {
    Ran(bool),
    NotRun,
}

impl ExOutcome {
    pub fn matched(self) -> Option<bool> {
        match self {
            ExOutcome::Ran(b) => Some(b),
            ExOutcome::NotRun => None,
        }
    }
}

impl Serialize for ExOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExOutcome::Ran(b) => s.serialize_bool(*b),
            ExOutcome::NotRun => s.serialize_str("not_run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalOutcome {
    pub em: bool,
    pub ex: ExOutcome,
    /// Per-clause verdicts; empty when either query failed to parse.
    pub clause_breakdown: BTreeMap<Clause, bool>,
    pub error: Option<String>,
}

fn clause_breakdown(p: &SqlAst, g: &SqlAst) -> BTreeMap<Clause, bool> {
    Clause::ALL
        .into_iter()
        .map(|c| {
            let same = match c {
                Clause::Select => p.distinct == g.distinct && p.select == g.select,
                Clause::From => p.from == g.from && p.join_conds == g.join_conds,
                Clause::Where => p.where_ == g.where_,
                Clause::GroupBy => p.group_by == g.group_by,
                Clause::Having => p.having == g.having,
                Clause::OrderBy => p.order_by == g.order_by,
                Clause::Limit => p.limit == g.limit,
                Clause::SetOp => p.set_op == g.set_op,
            };
            (c, same)
        })
        .collect()
}

fn prepare(sql: &str, schema: &SchemaDb, config: &EvalConfig) -> Result<SqlAst, SqlError> {
    let mut ast = parse_resolved(sql, schema)?;
    if !config.compare_values {
        mask_values(&mut ast);
    }
    Ok(canonicalize(ast))
}

/// Clause-wise comparison of canonical trees. Parse failures score as a
/// miss with the reason in `error`; `ex` is left [`ExOutcome::NotRun`].
pub fn exact_match(pred: &str, gold: &str, schema: &SchemaDb, config: &EvalConfig) -> EvalOutcome {
    let miss = |error: String| EvalOutcome {
        em: false,
        ex: ExOutcome::NotRun,
        clause_breakdown: BTreeMap::new(),
        error: Some(error),
    };
    let g = match prepare(gold, schema, config) {
        Ok(g) => g,
        Err(e) => return miss(format!("gold: {e}")),
    };
    let p = match prepare(pred, schema, config) {
        Ok(p) => p,
        Err(e) => return miss(format!("pred: {e}")),
    };
    let clause_breakdown = clause_breakdown(&p, &g);
    EvalOutcome {
        em: clause_breakdown.values().all(|&b| b),
        ex: ExOutcome::NotRun,
        clause_breakdown,
        error: None,
    }
}

/// One prediction to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalItem {
    pub pred: String,
    pub gold: String,
    pub db_id: String,
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    pub examples: usize,
    pub em: usize,
    /// Examples whose execution match ran.
    pub ex_runs: usize,
    pub ex: usize,
    pub em_rate: f64,
    /// `None` when no execution ran.
    pub ex_rate: Option<f64>,
}

impl Rates {
    fn from_outcomes<'a>(outcomes: impl Iterator<Item = &'a EvalOutcome>) -> Rates {
        let (mut examples, mut em, mut ex_runs, mut ex) = (0, 0, 0, 0);
        for o in outcomes {
            examples += 1;
            em += o.em as usize;
            if let Some(m) = o.ex.matched() {
                ex_runs += 1;
                ex += m as usize;
            }
        }
        let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Rates {
            examples,
            em,
            ex_runs,
            ex,
            em_rate: rate(em, examples),
            ex_rate: (ex_runs > 0).then(|| rate(ex, ex_runs)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub overall: Rates,
    /// Keyed by split label; examples without a label are only in `overall`.
    pub splits: BTreeMap<String, Rates>,
    pub outcomes: Vec<EvalOutcome>,
}

impl CorpusReport {
    /// `split  examples  EM%  EX%` lines with a header, overall last.
    pub fn to_tsv(&self) -> String {
        let pct = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{:.1}", r * 100.0));
        let mut out = String::from("split\texamples\tem\tex\n");
        let rows = self.splits.iter().map(|(k, v)| (k.as_str(), v)).chain([("all", &self.overall)]);
        for (name, r) in rows {
            out.push_str(&format!("{name}\t{}\t{}\t{}\n", r.examples, pct(Some(r.em_rate)), pct(r.ex_rate)));
        }
        out
    }
}

/// Score one pair: exact match, then execution match when a database
/// file is given.
pub fn evaluate_pair(
    item: &EvalItem,
    schema: Option<&SchemaDb>,
    db_path: Option<&Path>,
    config: &EvalConfig,
) -> EvalOutcome {
    let mut outcome = match schema {
        Some(s) => exact_match(&item.pred, &item.gold, s, config),
        None => EvalOutcome {
            em: false,
            ex: ExOutcome::NotRun,
            clause_breakdown: BTreeMap::new(),
            error: Some(format!("unknown db_id `{}`", item.db_id)),
        },
    };
    let Some(path) = db_path else {
        return outcome;
    };
    let note = |o: &mut EvalOutcome, msg: String| {
        o.error = Some(match o.error.take() {
            Some(e) => format!("{e}; {msg}"),
            None => msg,
        })
    };
    let conn = match open_database(path) {
        Ok(c) => c,
        Err(e) => {
            note(&mut outcome, e.to_string());
            return outcome;
        }
    };
    match exec::execution_match_on(&conn, &item.pred, &item.gold, config.timeout) {
        Ok(r) => {
            outcome.ex = ExOutcome::Ran(r.ex);
            if let Some(e) = r.error {
                note(&mut outcome, format!("pred execution: {e}"));
            }
        }
        Err(e) => note(&mut outcome, e.to_string()),
    }
    outcome
}

/// Score every item on a pool of `jobs` threads (0 = all cores). With no
/// `db_root`, execution match is skipped. Results keep input order.
pub fn evaluate_corpus(
    items: &[EvalItem],
    schemas: &[SchemaDb],
    db_root: Option<&Path>,
    config: &EvalConfig,
    jobs: usize,
) -> CorpusReport {
    let by_id: HashMap<&str, &SchemaDb> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let run = || -> Vec<EvalOutcome> {
        items
            .par_iter()
            .map(|item| {
                let path = db_root.map(|root| database_path(root, &item.db_id));
                evaluate_pair(item, by_id.get(item.db_id.as_str()).copied(), path.as_deref(), config)
            })
            .collect()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut groups: BTreeMap<String, Vec<&EvalOutcome>> = BTreeMap::new();
    for (item, o) in items.iter().zip(&outcomes) {
        if let Some(split) = &item.split {
            groups.entry(split.clone()).or_default().push(o);
        }
    }
    let splits = groups
        .into_iter()
        .map(|(k, v)| (k, Rates::from_outcomes(v.into_iter())))
        .collect();
    CorpusReport {
        overall: Rates::from_outcomes(outcomes.iter()),
        splits,
        outcomes,
    }
}
