//! End-to-end RetrievalQA assembly for the two compared configurations:
//! baseline (raw text corpus) and kg (linearized triple corpus).

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::dataset_io::{month_number, Calendar, ConversationMessage};
use crate::embed::EmbeddingProvider;
use crate::index::{
    chunk_documents, chunk_spans, top_k, ChunkKind, DocumentChunk, IndexError, SourceDoc,
    VectorIndex, DEFAULT_MAX_CHARS, DEFAULT_OVERLAP_CHARS, DEFAULT_TOP_K,
};
use crate::kg::{calendar_to_triples, conversation_to_triples, KnowledgeGraph, TripleExtractor};
use crate::llm::{GenerationParams, LlmClient, LlmError, PromptTemplate};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("embedding stage failed: {0}")]
    Embed(#[from] crate::embed::EmbedError),
    #[error("retrieval stage failed: {0}")]
    Retrieve(#[from] IndexError),
    #[error("generation stage failed: {0}")]
    Generate(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Kg,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Kg => "kg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub max_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            max_chars: DEFAULT_MAX_CHARS,
            overlap_chars: DEFAULT_OVERLAP_CHARS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub k: usize,
    pub template: PromptTemplate,
    pub params: GenerationParams,
    pub chunking: ChunkingConfig,
}

impl PipelineConfig {
    pub fn for_mode(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            k: DEFAULT_TOP_K,
            template: PromptTemplate::default(),
            params: GenerationParams::default(),
            chunking: ChunkingConfig::default(),
        }
    }
}

/// File form of [`PipelineConfig`] (TOML or JSON); every field optional so
/// CLI flags can fill the rest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineConfigFile {
    pub mode: Option<Mode>,
    pub k: Option<usize>,
    pub template: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f32>,
    pub repetition_penalty: Option<f32>,
    pub seed: Option<u64>,
    pub max_chars: Option<usize>,
    pub overlap_chars: Option<usize>,
}

impl PipelineConfigFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }

    /// Apply file values over a base config; explicit fields win.
    pub fn apply(&self, mut cfg: PipelineConfig) -> Result<PipelineConfig, LlmError> {
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(template) = &self.template {
            cfg.template = PromptTemplate::new(template.clone())?;
        }
        if let Some(v) = self.max_tokens {
            cfg.params.max_tokens = v;
        }
        if let Some(v) = self.temperature {
            cfg.params.temperature = v;
        }
        if let Some(v) = self.repetition_penalty {
            cfg.params.repetition_penalty = v;
        }
        if let Some(v) = self.seed {
            cfg.params.seed = Some(v);
        }
        if let Some(v) = self.max_chars {
            cfg.chunking.max_chars = v;
        }
        if let Some(v) = self.overlap_chars {
            cfg.chunking.overlap_chars = v;
        }
        Ok(cfg)
    }
}

/// Answer to one query with its retrieval trace and wall-clock latency
/// around retrieval + generation only.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub text: String,
    pub retrieved: Vec<(String, f32)>,
    pub latency_seconds: f64,
}

/// Raw-text corpus: calendar events as readable per-month lines plus
/// `"<sender>: <text>"` conversation lines, chunked per config.
pub fn build_baseline_corpus(
    cal: &Calendar,
    conversations: &[ConversationMessage],
    chunking: ChunkingConfig,
) -> Result<Vec<DocumentChunk>, IndexError> {
    let mut docs = Vec::new();
    for group in &cal.months {
        if group.events.is_empty() {
            continue;
        }
        let lines: Vec<String> = group
            .events
            .iter()
            .map(|e| {
                format!(
                    "{} on {} from {}.",
                    e.title,
                    e.date.format("%Y-%m-%d"),
                    e.time
                )
            })
            .collect();
        docs.push(SourceDoc {
            text: lines.join("\n"),
            provenance: group.name.clone(),
        });
    }

    let mut current: Option<(String, Vec<String>)> = None;
    let flush = |docs: &mut Vec<SourceDoc>, conv: Option<(String, Vec<String>)>| {
        if let Some((id, lines)) = conv {
            docs.push(SourceDoc {
                text: lines.join("\n"),
                provenance: id,
            });
        }
    };
    for msg in conversations {
        match &mut current {
            Some((id, lines)) if *id == msg.conversation_id => {
                lines.push(format!("{}: {}", msg.sender, msg.text));
            }
            _ => {
                flush(&mut docs, current.take());
                current = Some((
                    msg.conversation_id.clone(),
                    vec![format!("{}: {}", msg.sender, msg.text)],
                ));
            }
        }
    }
    flush(&mut docs, current.take());

    chunk_documents(&docs, chunking.max_chars, chunking.overlap_chars, ChunkKind::Raw)
}

/// Merged knowledge graph over calendar and conversation triples.
pub fn build_graph(
    cal: &Calendar,
    conversations: &[ConversationMessage],
    extractor: &dyn TripleExtractor,
) -> KnowledgeGraph {
    let calendar_graph = KnowledgeGraph::from_triples(calendar_to_triples(cal));
    let conversation_graph =
        KnowledgeGraph::from_triples(conversation_to_triples(conversations, extractor));
    calendar_graph.merge(&conversation_graph)
}

/// KG corpus: one chunk per linearized triple (split only when a line
/// exceeds max_chars), kind=kg, provenance from the triple.
pub fn build_kg_corpus(
    cal: &Calendar,
    conversations: &[ConversationMessage],
    extractor: &dyn TripleExtractor,
    chunking: ChunkingConfig,
) -> Result<Vec<DocumentChunk>, IndexError> {
    if chunking.max_chars < 64 || chunking.overlap_chars >= chunking.max_chars {
        return Err(IndexError::InvalidChunkParams {
            max_chars: chunking.max_chars,
            overlap_chars: chunking.overlap_chars,
        });
    }
    let graph = build_graph(cal, conversations, extractor);
    let mut chunks = Vec::new();
    let mut per_provenance = std::collections::HashMap::new();
    for (line, provenance) in graph.linearize() {
        for (start, end) in chunk_spans(&line, chunking.max_chars, chunking.overlap_chars) {
            let counter = per_provenance.entry(provenance.clone()).or_insert(0usize);
            chunks.push(DocumentChunk {
                chunk_id: format!("{provenance}#{counter}"),
                text: line[start..end].to_string(),
                kind: ChunkKind::Kg,
                provenance: provenance.clone(),
            });
            *counter += 1;
        }
    }
    Ok(chunks)
}

static DATE_PATTERN: OnceLock<Regex> = OnceLock::new();

/// How many times each recognized date is appended in ISO form. A single
/// mention gets drowned out by character-trigram overlap on ordinary words,
/// so the date is repeated to dominate the query vector.
const DATE_EXPANSION_REPEATS: usize = 3;

/// Append ISO forms of natural-language dates ("August 19th, 2024" ->
/// "... 2024-08-19 2024-08-19 2024-08-19") so date mentions in queries line
/// up with the ISO dates stored in the corpus. Returns the query unchanged
/// when nothing matches.
pub fn expand_query_dates(query: &str) -> String {
    let re = DATE_PATTERN.get_or_init(|| {
        Regex::new(
            r"(?i)\b(january|february|march|april|may|june|july|august|september|october|november|december)\s+(\d{1,2})(?:st|nd|rd|th)?(?:,)?\s+(\d{4})\b",
        )
        .expect("date pattern compiles")
    });
    let mut expanded = query.to_string();
    for caps in re.captures_iter(query) {
        let month = month_number(&caps[1]).expect("alternation lists months");
        let day: u32 = caps[2].parse().unwrap_or(0);
        let year: i32 = caps[3].parse().unwrap_or(0);
        if chrono::NaiveDate::from_ymd_opt(year, month, day).is_some() {
            for _ in 0..DATE_EXPANSION_REPEATS {
                expanded.push_str(&format!(" {year:04}-{month:02}-{day:02}"));
            }
        }
    }
    expanded
}

/// Full query path: embed (with date expansion) -> top-k -> context ->
/// prompt -> generate, timing retrieval + generation.
pub fn answer(
    query: &str,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    client: &dyn LlmClient,
    cfg: &PipelineConfig,
    clock: &dyn Clock,
) -> Result<Answer, PipelineError> {
    let started = clock.now_seconds();

    let expanded = expand_query_dates(query);
    let query_vector = provider.embed_one(&expanded)?;
    let retrieved = top_k(index, &query_vector, cfg.k)?;
    let context = retrieved
        .iter()
        .filter_map(|(id, _)| index.chunk(id).map(|c| c.text.as_str()))
        .collect::<Vec<&str>>()
        .join("\n");
    let prompt = cfg.template.render(&context, query);
    let text = client.generate(&prompt, &cfg.params)?;

    let latency_seconds = (clock.now_seconds() - started).max(0.0);
    Ok(Answer {
        text,
        retrieved,
        latency_seconds,
    })
}
