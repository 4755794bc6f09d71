//! Command-line front end: loads graphs, builds catalogs, answers questions
//! and evaluates datasets.
//!
//! Exit codes: 0 on success, 1 for usage problems, 2 for unreadable or
//! malformed data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use kgqa_core::catalog::{build_lexical_index, Catalogs, LexicalIndex, MatchConfig};
use kgqa_core::eval::{evaluate, load_dataset, render_table, EvalOptions, ParserKind};
use kgqa_core::mp::{answer_question, explain, FinalAnswer, Hyperparams};
use kgqa_core::question::{annotate_heuristic, interpret, InterpretedQuestion, QuestionInput};
use kgqa_core::snapshot::{is_snapshot, load_snapshot, save_snapshot};
use kgqa_core::store::KnowledgeGraph;
use kgqa_core::vectors::VectorTable;

#[derive(Parser)]
#[command(
    name = "kgqa",
    version,
    about = "Answer natural-language questions over an RDF knowledge graph",
    after_help = "Defaults can also come from a JSON file named by the KGQA_CONFIG \
                  environment variable; command-line flags win over the file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a graph file and write a binary snapshot for fast reloading
    Load(LoadArgs),
    /// Build the lexical label index and write it to disk
    Index(LoadArgs),
    /// Answer one question and print the result as JSON
    Answer(AnswerArgs),
    /// Answer one question with a full per-hop trace attached
    Explain(AnswerArgs),
    /// Answer every question of a dataset and report precision and recall
    Eval(EvalArgs),
}

#[derive(Args)]
struct StoreArgs {
    /// Graph file: N-Triples text or a previously written snapshot
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Token vector table enabling embedding-based property matching
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Previously written lexical index (otherwise built in memory)
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Args)]
struct LoadArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// Destination file (defaults next to the graph file)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// Activation threshold an entity must reach to become an answer
    #[arg(long)]
    threshold: Option<f64>,
    /// Candidates kept per entity or class reference
    #[arg(long)]
    top_entities: Option<usize>,
    /// Candidates kept per property reference
    #[arg(long)]
    top_properties: Option<usize>,
    /// Keep answers that fail the class membership check
    #[arg(long)]
    no_class_filter: bool,
    /// Maximum supported hop count
    #[arg(long)]
    max_hops: Option<usize>,
}

#[derive(Args)]
struct AnswerArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Write the JSON result here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Question text, or a path to a JSON question file (either a plain
    /// model with reference texts or a full interpretation with candidates)
    question: String,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// JSONL dataset with one gold-annotated question per line
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Reference source: gold annotation spans or the built-in parser
    #[arg(long, value_enum)]
    parser: Option<ParserChoice>,
    /// Worker threads for answering questions
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the JSON report here; the table still goes to standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ParserChoice {
    Gold,
    Heuristic,
}

impl From<ParserChoice> for ParserKind {
    fn from(choice: ParserChoice) -> ParserKind {
        match choice {
            ParserChoice::Gold => ParserKind::Gold,
            ParserChoice::Heuristic => ParserKind::Heuristic,
        }
    }
}

/// Flat JSON configuration file named by `KGQA_CONFIG`.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    kg_path: Option<PathBuf>,
    vectors_path: Option<PathBuf>,
    index_path: Option<PathBuf>,
    dataset_path: Option<PathBuf>,
    answer_threshold: Option<f64>,
    top_entities: Option<usize>,
    top_properties: Option<usize>,
    class_filter: Option<bool>,
    parser: Option<ParserKind>,
    max_hops: Option<usize>,
    jobs: Option<usize>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(context: &str, err: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{context}: {err}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let config = match load_config() {
        Ok(config) => config,
        Err(err) => return report(err),
    };
    match run(cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(err),
    }
}

fn report(err: CliError) -> ExitCode {
    match err {
        CliError::Usage(msg) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        CliError::Data(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config() -> Result<FileConfig, CliError> {
    let Some(path) = std::env::var_os("KGQA_CONFIG") else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::data(&format!("config {}", Path::new(&path).display()), e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::data(&format!("config {}", Path::new(&path).display()), e))
}

fn run(cli: Cli, config: &FileConfig) -> Result<(), CliError> {
    match cli.command {
        Command::Load(args) => cmd_load(args, config),
        Command::Index(args) => cmd_index(args, config),
        Command::Answer(args) => cmd_answer(args, config, false),
        Command::Explain(args) => cmd_answer(args, config, true),
        Command::Eval(args) => cmd_eval(args, config),
    }
}

fn kg_path(store: &StoreArgs, config: &FileConfig) -> Result<PathBuf, CliError> {
    store
        .kg
        .clone()
        .or_else(|| config.kg_path.clone())
        .ok_or_else(|| CliError::Usage("no graph given; pass --kg or set kg_path".to_string()))
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph, CliError> {
    let snapshot = is_snapshot(path).map_err(|e| CliError::data(&path.display().to_string(), e))?;
    if snapshot {
        load_snapshot(path).map_err(|e| CliError::data(&path.display().to_string(), e))
    } else {
        KnowledgeGraph::load_ntriples(path)
            .map_err(|e| CliError::data(&path.display().to_string(), e))
    }
}

fn load_catalogs(
    kg: &KnowledgeGraph,
    store: &StoreArgs,
    config: &FileConfig,
) -> Result<Catalogs, CliError> {
    let vectors = match store.vectors.clone().or_else(|| config.vectors_path.clone()) {
        Some(path) => Some(
            VectorTable::load(&path).map_err(|e| CliError::data(&path.display().to_string(), e))?,
        ),
        None => None,
    };
    let lexical = match store.index.clone().or_else(|| config.index_path.clone()) {
        Some(path) => LexicalIndex::load(&path)
            .map_err(|e| CliError::data(&path.display().to_string(), e))?,
        None => build_lexical_index(kg),
    };
    Ok(Catalogs { lexical, vectors })
}

fn hyperparams(engine: &EngineArgs, config: &FileConfig) -> Hyperparams {
    let mut params = Hyperparams::default();
    if let Some(t) = engine.threshold.or(config.answer_threshold) {
        params.answer_threshold = t;
    }
    if engine.no_class_filter {
        params.class_filter = false;
    } else if let Some(keep) = config.class_filter {
        params.class_filter = keep;
    }
    if let Some(hops) = engine.max_hops.or(config.max_hops) {
        params.max_hops = hops;
    }
    params
}

fn match_config(engine: &EngineArgs, config: &FileConfig) -> MatchConfig {
    let mut cfg = MatchConfig::default();
    if let Some(k) = engine.top_entities.or(config.top_entities) {
        cfg.top_entities = k;
    }
    if let Some(k) = engine.top_properties.or(config.top_properties) {
        cfg.top_properties = k;
    }
    cfg
}

fn cmd_load(args: LoadArgs, config: &FileConfig) -> Result<(), CliError> {
    let input = kg_path(&args.store, config)?;
    let kg = load_graph(&input)?;
    let output = args.output.unwrap_or_else(|| input.with_extension("kgs"));
    save_snapshot(&kg, &output).map_err(|e| CliError::data(&output.display().to_string(), e))?;
    println!(
        "wrote {} ({} terms, {} triples, {} labelled)",
        output.display(),
        kg.term_count(),
        kg.triple_count(),
        kg.labeled_term_count()
    );
    Ok(())
}

fn cmd_index(args: LoadArgs, config: &FileConfig) -> Result<(), CliError> {
    let input = kg_path(&args.store, config)?;
    let kg = load_graph(&input)?;
    let index = build_lexical_index(&kg);
    let output = args.output.unwrap_or_else(|| input.with_extension("kgx"));
    index.save(&output).map_err(|e| CliError::data(&output.display().to_string(), e))?;
    println!("wrote {} ({} documents)", output.display(), index.doc_count());
    Ok(())
}

/// A question argument is treated as a file when it points at one; the file
/// may hold either a plain model or a full interpretation. Anything else is
/// parsed as question text by the built-in annotator.
fn interpret_question(
    kg: &KnowledgeGraph,
    catalogs: &Catalogs,
    cfg: &MatchConfig,
    question: &str,
) -> Result<InterpretedQuestion, CliError> {
    let path = Path::new(question);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::data(&path.display().to_string(), e))?;
        let input: QuestionInput = serde_json::from_str(&text)
            .map_err(|e| CliError::data(&path.display().to_string(), e))?;
        match input {
            QuestionInput::Interpreted(wire) => InterpretedQuestion::from_wire(kg, wire)
                .map_err(|e| CliError::data(&path.display().to_string(), e)),
            QuestionInput::Model(model) => Ok(interpret(kg, catalogs, &model, cfg)),
        }
    } else {
        let model = annotate_heuristic(question);
        Ok(interpret(kg, catalogs, &model, cfg))
    }
}

fn emit(value: &impl serde::Serialize, output: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("serializable result");
    match output {
        Some(path) => fs::write(path, json.as_bytes())
            .map_err(|e| CliError::data(&path.display().to_string(), e)),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn cmd_answer(args: AnswerArgs, config: &FileConfig, want_trace: bool) -> Result<(), CliError> {
    let kg = load_graph(&kg_path(&args.engine.store, config)?)?;
    let catalogs = load_catalogs(&kg, &args.engine.store, config)?;
    let cfg = match_config(&args.engine, config);
    let params = hyperparams(&args.engine, config);

    let iq = interpret_question(&kg, &catalogs, &cfg, &args.question)?;
    let answer: FinalAnswer = if want_trace {
        explain(&kg, &iq, &params)
    } else {
        answer_question(&kg, &iq, &params)
    }
    .map_err(|e| CliError::Data(e.to_string()))?;

    emit(&answer, args.output.as_deref())
}

fn cmd_eval(args: EvalArgs, config: &FileConfig) -> Result<(), CliError> {
    let kg = load_graph(&kg_path(&args.engine.store, config)?)?;
    let catalogs = load_catalogs(&kg, &args.engine.store, config)?;

    let dataset = args
        .dataset
        .clone()
        .or_else(|| config.dataset_path.clone())
        .ok_or_else(|| {
            CliError::Usage("no dataset given; pass --dataset or set dataset_path".to_string())
        })?;
    let records = load_dataset(&dataset)
        .map_err(|e| CliError::data(&dataset.display().to_string(), e))?;

    let opts = EvalOptions {
        parser: args.parser.map(ParserKind::from).or(config.parser).unwrap_or(ParserKind::Gold),
        params: hyperparams(&args.engine, config),
        match_config: match_config(&args.engine, config),
        jobs: args.jobs.or(config.jobs).unwrap_or(1).max(1),
    };
    let report = evaluate(&kg, &catalogs, &records, &opts);

    print!("{}", render_table(&report));
    emit(&report, args.output.as_deref())
}
