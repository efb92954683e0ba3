//! `semfence` command-line interface.

mod io;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use semfence::corpus::{database_path, parse_component_annotations, parse_examples, parse_schemas, read_examples};
use semfence::eval::{EvalItem, DEFAULT_TIMEOUT};
use semfence::serialize::DEFAULT_GROUND_THRESHOLD;
use semfence::subword::audit_corpus;
use semfence::{
    build_model_pair, evaluate_corpus, mark_pair, postprocess_sql, preprocess_schema, preprocess_sql, strip_markers,
    EvalConfig, KeywordMap, PairOptions, SchemaDb, SubwordVocabulary,
};

use crate::io::{lines, open_output, read_input, tsv_cell, Record};

#[derive(Parser)]
#[command(name = "semfence", version, about = "Semantic-boundary preprocessing and evaluation for text-to-SQL corpora")]
struct Cli {
    /// Worker threads for corpus-level commands (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output record format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Space underscores and dots and spell out keywords, line by line.
    Preprocess(PreprocessArgs),
    /// Wrap annotated components in [sepN] ... [/sepN] markers.
    Mark(MarkArgs),
    /// Report tokens that straddle semantic units.
    Audit(AuditArgs),
    /// Build model (source, target) pairs.
    Serialize(SerializeArgs),
    /// Score predictions with exact match and execution match.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sql,
    Schema,
}

#[derive(Args)]
struct KeywordArgs {
    /// Two-column TSV of abbreviation and expansion; replaces the default
    /// avg/desc/asc table.
    #[arg(long)]
    keywords: Option<PathBuf>,
}

impl KeywordArgs {
    fn load(&self) -> Result<KeywordMap> {
        match &self.keywords {
            Some(p) => KeywordMap::from_tsv(&read_input(p)?).with_context(|| format!("{}", p.display())),
            None => Ok(KeywordMap::default()),
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input lines; `-` for stdin.
    #[arg(default_value = "-")]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Sql)]
    mode: Mode,
    /// Undo SQL preprocessing instead.
    #[arg(long, conflicts_with = "mode")]
    reverse: bool,
    /// Treat input as JSON-lines and rewrite this string field.
    #[arg(long)]
    field: Option<String>,
    #[command(flatten)]
    keywords: KeywordArgs,
}

#[derive(Args)]
struct MarkArgs {
    /// Spider-style examples JSON.
    #[arg(long)]
    examples: PathBuf,
    /// Component annotations JSON.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(default_value = "-")]
    input: PathBuf,
    /// Vocabulary: plain text (one token per line) or JSON.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    field: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    keywords: KeywordArgs,
}

#[derive(Args)]
struct DbArgs {
    /// Spider tables.json.
    #[arg(long)]
    tables: PathBuf,
    /// Directory holding `<db_id>/<db_id>.sqlite`.
    #[arg(long, env = "SEMFENCE_DB_ROOT")]
    db_root: Option<PathBuf>,
}

#[derive(Args)]
struct SerializeArgs {
    #[arg(long)]
    examples: PathBuf,
    #[command(flatten)]
    db: DbArgs,
    /// Component annotations; required unless --no-mark.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    no_ground: bool,
    #[arg(long)]
    no_preprocess: bool,
    #[arg(long)]
    no_mark: bool,
    #[arg(long, default_value_t = DEFAULT_GROUND_THRESHOLD)]
    ground_threshold: f64,
    /// Also space underscores in the database id.
    #[arg(long)]
    preprocess_db_id: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    keywords: KeywordArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON-lines `{pred, gold?, db_id, split?}`, or TSV lines `pred[\tdb_id]`.
    #[arg(long)]
    preds: PathBuf,
    /// Gold TSV lines `gold\tdb_id`, matched to predictions by position.
    #[arg(long)]
    golds: Option<PathBuf>,
    #[command(flatten)]
    db: DbArgs,
    /// Compare literal values in exact match.
    #[arg(long)]
    compare_values: bool,
    /// Per-query execution timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Remove boundary markers from predictions.
    #[arg(long)]
    strip_markers: bool,
    /// Undo preprocessing of predictions.
    #[arg(long)]
    postprocess: bool,
    /// Skip execution match even when databases are available.
    #[arg(long)]
    no_exec: bool,
    /// Also write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    keywords: KeywordArgs,
}

fn load_schemas(path: &Path) -> Result<Vec<SchemaDb>> {
    Ok(parse_schemas(&read_input(path)?, &path.display().to_string())?)
}

fn cmd_preprocess(a: &PreprocessArgs) -> Result<ExitCode> {
    let kw = a.keywords.load()?;
    let field = a.field.as_deref();
    let mut out = open_output(a.output.as_ref())?;
    for (n, line) in lines(&a.input)? {
        let rec = Record::parse(&line, field, n)?;
        let text = rec.text(field);
        let rewritten = if a.reverse {
            postprocess_sql(text, &kw).map_err(|e| anyhow!("line {n}: {e}"))?
        } else {
            match a.mode {
                Mode::Schema => preprocess_schema(text),
                Mode::Sql => preprocess_sql(text, &kw).map_err(|e| anyhow!("line {n}: {e}"))?,
            }
        };
        writeln!(out, "{}", rec.with_text(field, rewritten))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_mark(a: &MarkArgs, format: Format) -> Result<ExitCode> {
    let examples = read_examples(&read_input(&a.examples)?, &a.examples.display().to_string())?;
    let annotated = parse_component_annotations(&read_input(&a.annotations)?, &a.annotations.display().to_string(), examples)?;
    for d in &annotated.diagnostics {
        eprintln!("warning: {d}");
    }
    let mut out = open_output(a.output.as_ref())?;
    for (i, ex) in annotated.examples.iter().enumerate() {
        let Some(aligns) = &ex.alignments else { continue };
        let (q, t) = mark_pair(&ex.question, &ex.target, aligns).with_context(|| format!("example {i}"))?;
        match format {
            Format::Json => writeln!(out, "{}", json!({"index": i, "db_id": ex.db_id, "question": q, "target": t}))?,
            Format::Tsv => writeln!(out, "{i}\t{}\t{}\t{}", ex.db_id, tsv_cell(&q), tsv_cell(&t))?,
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(a: &AuditArgs, format: Format) -> Result<ExitCode> {
    let kw = a.keywords.load()?;
    let vocab = SubwordVocabulary::load(&a.vocab)?;
    let field = a.field.as_deref();
    let texts = lines(&a.input)?
        .into_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| Record::parse(&l, field, n).map(|r| r.text(field).to_string()))
        .collect::<Result<Vec<_>>>()?;
    let report = audit_corpus(&texts, &vocab, &kw);
    let mut out = open_output(a.output.as_ref())?;
    for audit in &report.audits {
        match format {
            Format::Json => writeln!(
                out,
                "{}",
                json!({
                    "text": audit.text,
                    "tokens": audit.tokens,
                    "violations": audit.violations.iter().map(|&i| &audit.tokens[i]).collect::<Vec<_>>(),
                    "resolvable": audit.resolvable,
                })
            )?,
            Format::Tsv => writeln!(out, "{}\t{}\t{}", audit.violations.len(), audit.resolvable, tsv_cell(&audit.text))?,
        }
    }
    out.flush()?;
    eprintln!(
        "texts={} with_violations={} violations={} resolvable_fraction={:.4}",
        report.texts,
        report.texts_with_violations,
        report.total_violations,
        report.resolvable_fraction()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_serialize(a: &SerializeArgs, format: Format) -> Result<ExitCode> {
    let mut schemas = load_schemas(&a.db.tables)?;
    let mut examples = parse_examples(&read_input(&a.examples)?, &a.examples.display().to_string(), &schemas)?;
    if !a.no_mark {
        let path = a.annotations.as_ref().ok_or_else(|| anyhow!("marking needs --annotations (or pass --no-mark)"))?;
        let annotated = parse_component_annotations(&read_input(path)?, &path.display().to_string(), examples)?;
        for d in &annotated.diagnostics {
            eprintln!("warning: {d}");
        }
        examples = annotated.examples;
    }
    if !a.no_ground {
        match &a.db.db_root {
            Some(root) => {
                let used: std::collections::HashSet<&str> = examples.iter().map(|e| e.db_id.as_str()).collect();
                for db in schemas.iter_mut().filter(|s| used.contains(s.db_id.as_str())) {
                    let path = database_path(root, &db.db_id);
                    db.ensure_contents(&path).with_context(|| format!("indexing {}", path.display()))?;
                }
            }
            None => eprintln!("warning: no --db-root; values are not grounded"),
        }
    }
    let options = PairOptions {
        preprocess: !a.no_preprocess,
        mark: !a.no_mark,
        ground: !a.no_ground,
        ground_threshold: a.ground_threshold,
        preprocess_db_id: a.preprocess_db_id,
        keywords: a.keywords.load()?,
    };
    let by_id: HashMap<&str, &SchemaDb> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let mut out = open_output(a.output.as_ref())?;
    for (i, ex) in examples.iter().enumerate() {
        let db = by_id[ex.db_id.as_str()];
        let (source, target) = build_model_pair(ex, db, &options).with_context(|| format!("example {i}"))?;
        match format {
            Format::Json => writeln!(out, "{}", json!({"source": source, "target": target, "db_id": ex.db_id}))?,
            Format::Tsv => writeln!(out, "{}\t{}\t{}", tsv_cell(&source), tsv_cell(&target), ex.db_id)?,
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct PredRecord {
    pred: String,
    gold: Option<String>,
    db_id: Option<String>,
    split: Option<String>,
}

fn split_tsv(line: &str) -> (String, Option<String>) {
    match line.rsplit_once('\t') {
        Some((sql, db)) => (sql.trim().to_string(), Some(db.trim().to_string())),
        None => (line.trim().to_string(), None),
    }
}

fn read_items(a: &EvalArgs) -> Result<Vec<EvalItem>> {
    let golds = match &a.golds {
        Some(p) => lines(p)?.into_iter().filter(|(_, l)| !l.trim().is_empty()).map(|(_, l)| split_tsv(&l)).collect(),
        None => Vec::new(),
    };
    let preds: Vec<(usize, String)> = lines(&a.preds)?.into_iter().filter(|(_, l)| !l.trim().is_empty()).collect();
    if a.golds.is_some() && golds.len() != preds.len() {
        bail!("{} predictions but {} gold queries", preds.len(), golds.len());
    }
    preds
        .into_iter()
        .enumerate()
        .map(|(i, (n, line))| {
            let rec = if line.trim_start().starts_with('{') {
                serde_json::from_str::<PredRecord>(&line).with_context(|| format!("{}: line {n}", a.preds.display()))?
            } else {
                let (pred, db_id) = split_tsv(&line);
                PredRecord { pred, gold: None, db_id, split: None }
            };
            let (gold_sql, gold_db) = golds.get(i).cloned().unwrap_or_default();
            let gold = rec.gold.or((!gold_sql.is_empty()).then_some(gold_sql));
            let db_id = rec.db_id.or(gold_db);
            match (gold, db_id) {
                (Some(gold), Some(db_id)) => Ok(EvalItem { pred: rec.pred, gold, db_id, split: rec.split }),
                (None, _) => bail!("line {n}: no gold query (give it inline or with --golds)"),
                (_, None) => bail!("line {n}: no db_id"),
            }
        })
        .collect()
}

fn cmd_eval(a: &EvalArgs, format: Format, jobs: usize) -> Result<ExitCode> {
    let schemas = load_schemas(&a.db.tables)?;
    let kw = a.keywords.load()?;
    let mut items = read_items(a)?;
    for item in &mut items {
        if a.strip_markers {
            item.pred = strip_markers(&item.pred).plain;
        }
        if a.postprocess {
            // An unbalanced quote leaves the prediction as is; scoring reports it.
            if let Ok(p) = postprocess_sql(&item.pred, &kw) {
                item.pred = p;
            }
        }
    }
    if !(0.0..=86_400.0).contains(&a.timeout) {
        bail!("--timeout must be between 0 and 86400 seconds");
    }
    let config = EvalConfig {
        compare_values: a.compare_values,
        timeout: Duration::from_secs_f64(a.timeout),
    };
    let db_root = if a.no_exec { None } else { a.db.db_root.as_deref() };
    let report = evaluate_corpus(&items, &schemas, db_root, &config, jobs);
    if let Some(path) = &a.report {
        let mut f = open_output(Some(path))?;
        serde_json::to_writer_pretty(&mut f, &report)?;
        writeln!(f)?;
        f.flush()?;
    }
    let mut out = open_output(a.output.as_ref())?;
    match format {
        Format::Tsv => write!(out, "{}", report.to_tsv())?,
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&json!({"overall": report.overall, "splits": report.splits}))?
        )?,
    }
    out.flush()?;
    let failures = report.outcomes.iter().filter(|o| o.error.is_some()).count();
    if failures > 0 {
        eprintln!("{failures} of {} examples reported errors", items.len());
        for (i, o) in report.outcomes.iter().enumerate() {
            if let Some(e) = &o.error {
                eprintln!("  {i}: {e}");
            }
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()?;
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Mark(a) => cmd_mark(a, cli.format),
        Command::Audit(a) => cmd_audit(a, cli.format),
        Command::Serialize(a) => cmd_serialize(a, cli.format),
        Command::Eval(a) => cmd_eval(a, cli.format, cli.jobs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
