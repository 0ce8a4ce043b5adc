//! `kgrag`: build the personal knowledge graph, ask single questions, run
//! the baseline-vs-kg evaluation, and export the graph for visualization.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kgrag_core::clock::SystemClock;
use kgrag_core::dataset_io::{self};
use kgrag_core::embed::{EmbeddingProvider, HashEmbedder, RemoteEmbedder, DEFAULT_HASH_DIM};
use kgrag_core::harness::{emit_report, Harness, HarnessError};
use kgrag_core::index::build_index;
use kgrag_core::kg::RuleBasedExtractor;
use kgrag_core::llm::{ExtractiveMockLlm, HttpLlm, LlmClient, LlmError, PromptTemplate};
use kgrag_core::pipeline::{
    self, build_baseline_corpus, build_graph, build_kg_corpus, Mode, PipelineConfig,
    PipelineConfigFile, PipelineError,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "kgrag", version, about = "Personal knowledge-graph RAG pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Baseline,
    Kg,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderArg {
    Hash,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LlmArg {
    Mock,
    Remote,
}

#[derive(Args)]
struct DataArgs {
    /// Calendar JSON file.
    #[arg(long)]
    calendar: PathBuf,
    /// Conversations JSONL file.
    #[arg(long)]
    conversations: PathBuf,
}

#[derive(Args)]
struct StackArgs {
    /// Embedding provider. `remote` reads KGRAG_EMBED_URL / KGRAG_EMBED_TOKEN.
    #[arg(long, value_enum, default_value = "hash")]
    embedder: EmbedderArg,
    /// LLM backend. `remote` reads KGRAG_LLM_URL / KGRAG_LLM_TOKEN / KGRAG_LLM_MODEL.
    #[arg(long, value_enum, default_value = "mock")]
    llm: LlmArg,
    /// Optional TOML/JSON pipeline config file; CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Retrieved chunks per query.
    #[arg(long)]
    k: Option<usize>,
    /// Chunk window size in characters.
    #[arg(long)]
    max_chars: Option<usize>,
    /// Chunk overlap in characters.
    #[arg(long)]
    overlap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the dataset and build retrieval indices to disk.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stack: StackArgs,
        /// Which index/indices to build.
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one question and print the retrieved chunks.
    Ask {
        query: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stack: StackArgs,
        /// Retrieval corpus to use.
        #[arg(long, value_enum, default_value = "kg")]
        mode: ModeArg,
    },
    /// Run every QA pair through both modes and emit comparison reports.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// QA pairs JSON file.
        #[arg(long)]
        qa: PathBuf,
        #[command(flatten)]
        stack: StackArgs,
        /// Report output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the knowledge graph as Graphviz DOT.
    ExportDot {
        #[command(flatten)]
        data: DataArgs,
        /// Output DOT file.
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<dataset_io::DataError> for CliError {
    fn from(e: dataset_io::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<kgrag_core::index::IndexError> for CliError {
    fn from(e: kgrag_core::index::IndexError) -> Self {
        match e {
            kgrag_core::index::IndexError::Embed(inner) => CliError::Backend(inner.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Embed(_) | PipelineError::Generate(_) => {
                CliError::Backend(e.to_string())
            }
            PipelineError::Retrieve(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match &e {
            HarnessError::Data(_) | HarnessError::EmptyInput => CliError::Data(e.to_string()),
            HarnessError::IndexBuild { source, .. } => match source {
                kgrag_core::index::IndexError::Embed(_) => CliError::Backend(e.to_string()),
                _ => CliError::Data(e.to_string()),
            },
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::MissingPlaceholder { .. } => CliError::Usage(e.to_string()),
            other => CliError::Backend(other.to_string()),
        }
    }
}

fn build_pipeline_config(stack: &StackArgs, mode: Mode) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::for_mode(mode);
    if let Some(path) = &stack.config {
        let file = PipelineConfigFile::load(path).map_err(CliError::Usage)?;
        cfg = file.apply(cfg)?;
    }
    if let Some(k) = stack.k {
        cfg.k = k;
    }
    if let Some(v) = stack.max_chars {
        cfg.chunking.max_chars = v;
    }
    if let Some(v) = stack.overlap {
        cfg.chunking.overlap_chars = v;
    }
    if cfg.k == 0 {
        return Err(CliError::Usage("--k must be positive".into()));
    }
    Ok(cfg)
}

fn build_embedder(stack: &StackArgs) -> Result<(Box<dyn EmbeddingProvider>, &'static str), CliError> {
    match stack.embedder {
        EmbedderArg::Hash => Ok((Box::new(HashEmbedder::new(DEFAULT_HASH_DIM)), "hash")),
        EmbedderArg::Remote => {
            let provider = RemoteEmbedder::from_env()
                .map_err(|e| CliError::Backend(e.to_string()))?;
            Ok((Box::new(provider), "remote"))
        }
    }
}

fn build_llm(stack: &StackArgs, template: &PromptTemplate) -> Result<(Box<dyn LlmClient>, &'static str), CliError> {
    match stack.llm {
        LlmArg::Mock => Ok((Box::new(ExtractiveMockLlm::new(template.clone())), "mock")),
        LlmArg::Remote => Ok((Box::new(HttpLlm::from_env()?), "remote")),
    }
}

fn load_data(
    data: &DataArgs,
) -> Result<(dataset_io::Calendar, Vec<dataset_io::ConversationMessage>), CliError> {
    let calendar = dataset_io::load_calendar(&data.calendar)?;
    let conversations = dataset_io::load_conversations(&data.conversations)?;
    Ok((calendar, conversations))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            data,
            stack,
            mode,
            out,
        } => {
            let cfg = build_pipeline_config(&stack, Mode::Kg)?;
            let (provider, _) = build_embedder(&stack)?;
            let (calendar, conversations) = load_data(&data)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;

            if matches!(mode, ModeArg::Baseline | ModeArg::Both) {
                let chunks = build_baseline_corpus(&calendar, &conversations, cfg.chunking)?;
                let index = build_index(chunks, provider.as_ref())?;
                index.save(out.join("baseline"))?;
                println!(
                    "baseline index: {} chunks, dimension {}",
                    index.len(),
                    index.dimension()
                );
            }
            if matches!(mode, ModeArg::Kg | ModeArg::Both) {
                let graph = build_graph(&calendar, &conversations, &RuleBasedExtractor);
                graph
                    .write_tsv(out.join("triples.tsv"))
                    .map_err(|e| CliError::Data(e.to_string()))?;
                let chunks = build_kg_corpus(
                    &calendar,
                    &conversations,
                    &RuleBasedExtractor,
                    cfg.chunking,
                )?;
                let index = build_index(chunks, provider.as_ref())?;
                index.save(out.join("kg"))?;
                println!(
                    "kg index: {} triples, {} chunks, dimension {}",
                    graph.len(),
                    index.len(),
                    index.dimension()
                );
            }
            Ok(())
        }
        Command::Ask {
            query,
            data,
            stack,
            mode,
        } => {
            let mode = match mode {
                ModeArg::Baseline => Mode::Baseline,
                ModeArg::Kg => Mode::Kg,
                ModeArg::Both => {
                    return Err(CliError::Usage(
                        "ask needs --mode baseline or --mode kg".into(),
                    ))
                }
            };
            let cfg = build_pipeline_config(&stack, mode)?;
            let (provider, _) = build_embedder(&stack)?;
            let (client, _) = build_llm(&stack, &cfg.template)?;
            let (calendar, conversations) = load_data(&data)?;

            let chunks = match mode {
                Mode::Baseline => build_baseline_corpus(&calendar, &conversations, cfg.chunking)?,
                Mode::Kg => build_kg_corpus(
                    &calendar,
                    &conversations,
                    &RuleBasedExtractor,
                    cfg.chunking,
                )?,
            };
            let index = build_index(chunks, provider.as_ref())?;
            let clock = SystemClock::new();
            let answer = pipeline::answer(
                &query,
                &index,
                provider.as_ref(),
                client.as_ref(),
                &cfg,
                &clock,
            )?;

            println!("{}", answer.text);
            println!();
            println!("retrieved ({} mode, {:.3}s):", mode, answer.latency_seconds);
            for (chunk_id, score) in &answer.retrieved {
                let text = index.chunk(chunk_id).map(|c| c.text.as_str()).unwrap_or("");
                println!("  {score:.4}  {chunk_id}  {text}");
            }
            Ok(())
        }
        Command::Eval {
            data,
            qa,
            stack,
            out,
        } => {
            let cfg = build_pipeline_config(&stack, Mode::Kg)?;
            let (provider, embedder_label) = build_embedder(&stack)?;
            let (client, llm_label) = build_llm(&stack, &cfg.template)?;
            let clock = SystemClock::new();
            let harness = Harness {
                provider: provider.as_ref(),
                client: client.as_ref(),
                extractor: &RuleBasedExtractor,
                clock: &clock,
                embedder_label: embedder_label.into(),
                llm_label: llm_label.into(),
            };
            let report = harness.run_eval(&cfg, &data.calendar, &data.conversations, &qa)?;
            let (json_path, md_path) = emit_report(&report, &out)?;
            println!(
                "evaluated {} questions: mean ROUGE-1 F1 baseline {:.3} vs kg {:.3}",
                report.questions.len(),
                report.baseline_mean.rouge1.f1,
                report.kg_mean.rouge1.f1
            );
            println!("wrote {} and {}", json_path.display(), md_path.display());
            Ok(())
        }
        Command::ExportDot { data, out } => {
            let (calendar, conversations) = load_data(&data)?;
            let graph = build_graph(&calendar, &conversations, &RuleBasedExtractor);
            write_file(&out, &graph.export_dot())?;
            println!("wrote {} ({} triples)", out.display(), graph.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
