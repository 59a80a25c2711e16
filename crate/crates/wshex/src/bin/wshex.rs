//! Command-line front end for the WShEx toolkit.
//!
//! Three subcommands: `parse` (check and pretty-print a WShEx schema),
//! `validate` (check dump entities against a shape, with a whole-graph
//! and a streaming single-entity mode), and `convert` (turn a ShEx
//! entity schema written in the wdt:/p:/ps:/pq: reification style into
//! WShEx). Reports go to stdout, diagnostics to stderr, and the exit
//! code carries the verdict:
//!
//! - 0 — everything conformed / the conversion was clean
//! - 1 — some target failed, or the converter rejected a construct
//! - 2 — usage or parse error
//! - 3 — I/O error
//! - 4 — the validation engine hit its step budget
//!
//! A run mixing several of these reports the highest-precedence one:
//! 2, then 3, then 4, then 1. The step budget defaults to the engine's
//! own and can be overridden with the `WSHEX_STEP_BUDGET` environment
//! variable.

use std::env;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wshex::ast::{Schema, ShapeLabel};
use wshex::convert::{convert, parse_shexc_subset};
use wshex::dump::{
    load_graph, stream_validate, IngestError, IngestMode, IngestOptions, IngestStats,
    ReportRecord,
};
use wshex::model::{EntityId, WikibaseGraph};
use wshex::parser::{parse_schema, render_schema, ParseDiagnostic};
use wshex::validator::{Outcome, Validator, ValidatorOptions};

const EXIT_OK: u8 = 0;
const EXIT_NONCONFORMING: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(name = "wshex", version, about = "Schemas for Wikibase entities: parse and render WShEx, validate entity dumps, convert ShEx entity schemas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a WShEx schema and check it is well-formed.
    Parse {
        /// Schema file, WShEx compact syntax.
        schema: PathBuf,
        /// Pretty-print the parsed schema to stdout.
        #[arg(long)]
        render: bool,
    },
    /// Validate dump entities against one shape of a WShEx schema.
    Validate(ValidateArgs),
    /// Convert a ShEx entity schema (wdt:/p:/ps:/pq: reification style)
    /// to WShEx. Review notes and rejected constructs go to stderr.
    Convert {
        /// Schema file, ShEx compact syntax (Wikibase subset).
        schema: PathBuf,
        /// Write the converted schema here instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ValidateArgs {
    /// WShEx schema file.
    #[arg(long, value_name = "FILE")]
    schema: PathBuf,
    /// Entity dump: one JSON entity document per line, plain or
    /// array-framed.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// The shape to check against.
    #[arg(long, value_name = "SHAPE")]
    shape: String,
    /// Entity to validate; repeat the flag for several.
    #[arg(long, value_name = "ID", conflicts_with = "all")]
    target: Vec<String>,
    /// Validate every entity in the dump.
    #[arg(long)]
    all: bool,
    /// `full` loads the dump into one graph first; `local` streams it,
    /// checking each entity against its own statements only (verdicts
    /// that lean on cross-entity references are flagged approximate).
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    mode: Mode,
    /// `text` prints one human-readable line per verdict; `json` prints
    /// one JSON record per line.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Check qualifier conjunctions with the literal non-partitioning
    /// rule (strict reading; conjunctions of distinct required
    /// qualifiers become unsatisfiable).
    #[arg(long)]
    pedantic: bool,
    /// Cap the worker threads used for dump ingestion (default: all
    /// available cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Local,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// A command abort: the message goes to stderr, the code to the shell.
struct Failure {
    code: u8,
    message: String,
}

type CmdResult = Result<u8, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn io_failure(path: &Path, e: &io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse { schema, render } => cmd_parse(&schema, render),
        Command::Validate(args) => cmd_validate(&args),
        Command::Convert { schema, output } => cmd_convert(&schema, output.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_parse(path: &Path, render: bool) -> CmdResult {
    let schema = load_schema(path)?;
    if render {
        print!("{}", render_schema(&schema));
    } else {
        let n = schema.len();
        let s = if n == 1 { "" } else { "s" };
        println!("{}: {n} shape{s}, well-formed", path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    if args.target.is_empty() && !args.all {
        return Err(usage("pass --target <ID> (repeatable) or --all"));
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        // First rayon use in this process, so installing the global pool
        // cannot have been beaten to it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let targets = parse_targets(&args.target)?;
    let options = validator_options(args.pedantic)?;
    let schema = load_schema(&args.schema)?;
    if args.shape.is_empty() {
        return Err(usage("--shape must name a shape"));
    }
    let shape = ShapeLabel::new(&args.shape);
    let validator = Validator::new(&schema, options)
        .map_err(|e| usage(format!("{}: {e}", args.schema.display())))?;
    if schema.get(&shape).is_none() {
        return Err(usage(format!("shape <{shape}> is not defined in {}", args.schema.display())));
    }

    let file = fs::File::open(&args.data).map_err(|e| io_failure(&args.data, &e))?;
    let reader = BufReader::new(file);
    match args.mode {
        Mode::Full => validate_full(args, reader, &shape, &targets, &validator),
        Mode::Local => validate_local(args, reader, &schema, &shape, &targets, &validator, options),
    }
}

fn validate_full(
    args: &ValidateArgs,
    reader: impl io::BufRead,
    shape: &ShapeLabel,
    targets: &[EntityId],
    validator: &Validator,
) -> CmdResult {
    let ingest = IngestOptions { mode: IngestMode::FullGraph, ..Default::default() };
    let (graph, stats) =
        load_graph(reader, &ingest).map_err(|e| ingest_failure(&args.data, &e))?;
    report_stats(&args.data, &stats);

    let pairs: Vec<(EntityId, ShapeLabel)> = if args.all {
        graph.items().map(|id| (id, shape.clone())).collect()
    } else {
        targets.iter().map(|&id| (id, shape.clone())).collect()
    };
    let report = validator
        .validate(&graph, &pairs)
        .expect("the target shape was checked before ingestion");

    let mut any_limit = false;
    let mut all_conforming = true;
    for entry in &report.entries {
        any_limit |= entry.outcome == Outcome::EngineLimit;
        all_conforming &= entry.outcome == Outcome::Conforming;
        match args.format {
            Format::Text => println!("{entry}"),
            // One value per line, field-compatible with the streaming
            // report records (read_report accepts both).
            Format::Json => println!(
                "{}",
                serde_json::json!({
                    "node": entry.node.to_string(),
                    "shape": entry.shape.name(),
                    "status": entry.outcome.as_str(),
                    "trace": entry.trace,
                })
            ),
        }
    }
    Ok(verdict_code(any_limit, all_conforming))
}

#[allow(clippy::too_many_arguments)]
fn validate_local(
    args: &ValidateArgs,
    reader: impl io::BufRead,
    schema: &Schema,
    shape: &ShapeLabel,
    targets: &[EntityId],
    validator: &Validator,
    options: ValidatorOptions,
) -> CmdResult {
    let ingest = IngestOptions { mode: IngestMode::LocalOnly, ..Default::default() };
    let mut missing: Vec<EntityId> = targets.to_vec();
    let mut any_limit = false;
    let mut all_conforming = true;
    let mut emit = |record: ReportRecord, format: Format| {
        any_limit |= record.outcome == Outcome::EngineLimit;
        all_conforming &= record.outcome == Outcome::Conforming;
        match format {
            Format::Text => println!("{}", record_line(&record)),
            Format::Json => println!("{}", record.to_json_line()),
        }
    };

    let stats = stream_validate(reader, schema, shape, &ingest, options, |record| {
        if !args.all {
            match missing.iter().position(|id| *id == record.entity) {
                Some(i) => {
                    missing.remove(i);
                }
                None => return,
            }
        }
        emit(record, args.format);
    })
    .map_err(|e| ingest_failure(&args.data, &e))?;
    report_stats(&args.data, &stats);

    // Targets absent from the dump still get a verdict, computed over an
    // empty neighborhood — exactly what full mode sees for them.
    let empty = WikibaseGraph::new();
    for id in missing {
        let verdict = validator
            .validate_local(&empty, id, shape)
            .expect("the target shape was checked before ingestion");
        let record = ReportRecord {
            entity: id,
            shape: shape.clone(),
            outcome: verdict.outcome,
            approx: verdict.approximate,
        };
        emit(record, args.format);
    }
    Ok(verdict_code(any_limit, all_conforming))
}

fn cmd_convert(path: &Path, output: Option<&Path>) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, &e))?;
    let shex = parse_shexc_subset(&text).map_err(|diags| report_diagnostics(path, &diags))?;
    let report = convert(&shex);

    let rendered = render_schema(&report.converted);
    match output {
        Some(out) => fs::write(out, rendered.as_bytes()).map_err(|e| io_failure(out, &e))?,
        None => print!("{rendered}"),
    }

    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for rejected in &report.rejected {
        eprintln!("rejected: {}:{rejected}", path.display());
    }
    let shapes = report.converted.len();
    let s = if shapes == 1 { "" } else { "s" };
    eprintln!(
        "{}: {shapes} shape{s}, {} constraints mapped, {} constructs rejected",
        path.display(),
        report.mapped,
        report.rejected.len()
    );
    Ok(if report.rejected.is_empty() { EXIT_OK } else { EXIT_NONCONFORMING })
}

/// Read and parse a WShEx schema, turning diagnostics into a usage-level
/// failure after printing them.
fn load_schema(path: &Path) -> Result<Schema, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, &e))?;
    parse_schema(&text).map_err(|diags| report_diagnostics(path, &diags))
}

fn report_diagnostics(path: &Path, diags: &[ParseDiagnostic]) -> Failure {
    for d in diags {
        let mut line = format!("error: {}:{}: {}", path.display(), d.position, d.message);
        if !d.expected.is_empty() {
            line.push_str(&format!(" (expected one of: {})", d.expected.join(", ")));
        }
        eprintln!("{line}");
    }
    let n = diags.len();
    let s = if n == 1 { "" } else { "s" };
    usage(format!("{}: {n} parse error{s}", path.display()))
}

fn parse_targets(raw: &[String]) -> Result<Vec<EntityId>, Failure> {
    raw.iter()
        .map(|t| {
            t.parse::<EntityId>()
                .map_err(|_| usage(format!("`{t}` is not an entity id (expected Q<n> or P<n>)")))
        })
        .collect()
}

fn validator_options(pedantic: bool) -> Result<ValidatorOptions, Failure> {
    let mut options = ValidatorOptions { pedantic, ..ValidatorOptions::default() };
    if let Ok(raw) = env::var("WSHEX_STEP_BUDGET") {
        options.step_budget = raw
            .parse()
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| usage(format!("WSHEX_STEP_BUDGET must be a positive integer, got `{raw}`")))?;
    }
    Ok(options)
}

fn ingest_failure(path: &Path, e: &IngestError) -> Failure {
    let code = match e {
        IngestError::Io(_) => EXIT_IO,
        // Malformed data, a non-well-formed schema, or an unknown shape
        // are all input errors.
        _ => EXIT_USAGE,
    };
    Failure { code, message: format!("{}: {e}", path.display()) }
}

fn report_stats(data: &Path, stats: &IngestStats) {
    let mut line = format!(
        "{}: {} entities, {} statements",
        data.display(),
        stats.entities,
        stats.statements
    );
    if stats.malformed_lines > 0 {
        line.push_str(&format!(", {} malformed lines skipped", stats.malformed_lines));
    }
    if stats.unsupported_snaks > 0 {
        line.push_str(&format!(", {} unsupported snaks dropped", stats.unsupported_snaks));
    }
    eprintln!("{line}");
}

/// The streaming counterpart of the full-graph report line: same
/// `<node>@<shape>: VERDICT` shape, plus an approximation marker where a
/// cross-entity reference had to be assumed.
fn record_line(record: &ReportRecord) -> String {
    let verdict = match record.outcome {
        Outcome::Conforming => "CONFORMS",
        Outcome::NonConforming => "FAILS",
        Outcome::EngineLimit => "LIMIT (step budget exhausted)",
    };
    let approx =
        if record.approx { " (assumed cross-entity references)" } else { "" };
    format!("{}@{}: {verdict}{approx}", record.entity, record.shape)
}

fn verdict_code(any_limit: bool, all_conforming: bool) -> u8 {
    if any_limit {
        EXIT_LIMIT
    } else if !all_conforming {
        EXIT_NONCONFORMING
    } else {
        EXIT_OK
    }
}
