//! Personal RAG over a knowledge graph.
//!
//! Builds a knowledge graph of triples from personal calendar and
//! conversation data, retrieves over either the raw text (baseline) or the
//! linearized triples (kg mode) with an exact cosine top-k index, generates
//! answers through a pluggable LLM contract, and scores both modes with
//! from-scratch ROUGE/BLEU metrics.
//!
//! The offline stack (hash embedder + extractive mock LLM + fixed-step
//! clock) is fully deterministic, so end-to-end runs are reproducible
//! byte-for-byte.

pub mod clock;
pub mod dataset_io;
pub mod embed;
pub mod harness;
pub mod index;
pub mod kg;
pub mod llm;
pub mod metrics;
pub mod pipeline;

pub use clock::{Clock, FixedStepClock, SystemClock};
pub use dataset_io::{Calendar, CalendarEvent, ConversationMessage, DataError, QAPair};
pub use embed::{EmbeddingProvider, EmbeddingVector, HashEmbedder, RemoteEmbedder};
pub use harness::{emit_report, EvalConfig, EvalReport, Harness, HarnessError};
pub use index::{build_index, top_k, ChunkKind, DocumentChunk, VectorIndex};
pub use kg::{KnowledgeGraph, RuleBasedExtractor, Triple, TripleExtractor};
pub use llm::{
    ExtractiveMockLlm, GenerationParams, HttpLlm, LlmClient, LlmError, PromptTemplate,
};
pub use metrics::{bleu, rouge_l, rouge_n, MetricRow, ScoreTriple};
pub use pipeline::{Answer, Mode, PipelineConfig, PipelineError};
