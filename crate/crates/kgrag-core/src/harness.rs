//! Evaluation harness: run every QA pair through the baseline and kg
//! pipelines, score against golden answers, and emit comparison reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::dataset_io::{self, DataError, QAPair};
use crate::embed::EmbeddingProvider;
use crate::index::{build_index, IndexError, VectorIndex};
use crate::kg::TripleExtractor;
use crate::llm::LlmClient;
use crate::metrics::{aggregate, MetricRow, MetricsError};
use crate::pipeline::{self, Mode, PipelineConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("QA file contains no pairs")]
    EmptyInput,
    #[error("index build failed for {mode} corpus: {source}")]
    IndexBuild { mode: Mode, source: IndexError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write report to {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Configuration snapshot recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub max_chars: usize,
    pub overlap_chars: usize,
    pub template: String,
    pub max_tokens: u32,
    pub temperature: f32,
    pub repetition_penalty: f32,
    pub embedder: String,
    pub llm: String,
}

impl EvalConfig {
    pub fn snapshot(cfg: &PipelineConfig, embedder: &str, llm: &str) -> Self {
        EvalConfig {
            k: cfg.k,
            max_chars: cfg.chunking.max_chars,
            overlap_chars: cfg.chunking.overlap_chars,
            template: cfg.template.as_str().to_string(),
            max_tokens: cfg.params.max_tokens,
            temperature: cfg.params.temperature,
            repetition_penalty: cfg.params.repetition_penalty,
            embedder: embedder.to_string(),
            llm: llm.to_string(),
        }
    }
}

/// One mode's outcome for one question. A failed generation keeps the run
/// alive: the row scores zero and `note` records the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub answer: String,
    pub row: MetricRow,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub qa_id: String,
    pub question: String,
    pub golden_answer: String,
    pub baseline: ModeResult,
    pub kg: ModeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Sorted by qa_id.
    pub questions: Vec<QuestionResult>,
    pub baseline_mean: MetricRow,
    pub kg_mean: MetricRow,
}

impl EvalReport {
    pub fn rows(&self, mode: Mode) -> Vec<&MetricRow> {
        self.questions
            .iter()
            .map(|q| match mode {
                Mode::Baseline => &q.baseline.row,
                Mode::Kg => &q.kg.row,
            })
            .collect()
    }
}

/// The injected component stack the harness runs on.
pub struct Harness<'a> {
    pub provider: &'a dyn EmbeddingProvider,
    pub client: &'a dyn LlmClient,
    pub extractor: &'a dyn TripleExtractor,
    pub clock: &'a dyn Clock,
    /// Labels recorded in the report config snapshot.
    pub embedder_label: String,
    pub llm_label: String,
}

impl Harness<'_> {
    fn run_mode(
        &self,
        mode: Mode,
        index: &VectorIndex,
        cfg: &PipelineConfig,
        pair: &QAPair,
    ) -> ModeResult {
        let mut mode_cfg = cfg.clone();
        mode_cfg.mode = mode;
        match pipeline::answer(
            &pair.question,
            index,
            self.provider,
            self.client,
            &mode_cfg,
            self.clock,
        ) {
            Ok(answer) => ModeResult {
                row: MetricRow::score(
                    pair.id.clone(),
                    &answer.text,
                    &pair.golden_answer,
                    answer.latency_seconds,
                ),
                answer: answer.text,
                note: None,
            },
            Err(e) => ModeResult {
                answer: String::new(),
                row: MetricRow::zeroed(pair.id.clone()),
                note: Some(format!("{mode} generation failed for {}: {e}", pair.id)),
            },
        }
    }

    /// Build both corpora and indices once, answer every QA pair in both
    /// modes, score, and aggregate.
    pub fn run_eval(
        &self,
        cfg: &PipelineConfig,
        calendar_path: impl AsRef<Path>,
        conversations_path: impl AsRef<Path>,
        qa_path: impl AsRef<Path>,
    ) -> Result<EvalReport, HarnessError> {
        let calendar = dataset_io::load_calendar(calendar_path)?;
        let conversations = dataset_io::load_conversations(conversations_path)?;
        let mut qa_pairs = dataset_io::load_qa_pairs(qa_path)?;
        if qa_pairs.is_empty() {
            return Err(HarnessError::EmptyInput);
        }
        qa_pairs.sort_by(|a, b| a.id.cmp(&b.id));

        let build = |mode: Mode| -> Result<VectorIndex, HarnessError> {
            let chunks = match mode {
                Mode::Baseline => {
                    pipeline::build_baseline_corpus(&calendar, &conversations, cfg.chunking)
                }
                Mode::Kg => pipeline::build_kg_corpus(
                    &calendar,
                    &conversations,
                    self.extractor,
                    cfg.chunking,
                ),
            }
            .map_err(|source| HarnessError::IndexBuild { mode, source })?;
            build_index(chunks, self.provider)
                .map_err(|source| HarnessError::IndexBuild { mode, source })
        };
        let baseline_index = build(Mode::Baseline)?;
        let kg_index = build(Mode::Kg)?;

        let questions: Vec<QuestionResult> = qa_pairs
            .iter()
            .map(|pair| QuestionResult {
                qa_id: pair.id.clone(),
                question: pair.question.clone(),
                golden_answer: pair.golden_answer.clone(),
                baseline: self.run_mode(Mode::Baseline, &baseline_index, cfg, pair),
                kg: self.run_mode(Mode::Kg, &kg_index, cfg, pair),
            })
            .collect();

        let baseline_rows: Vec<MetricRow> =
            questions.iter().map(|q| q.baseline.row.clone()).collect();
        let kg_rows: Vec<MetricRow> = questions.iter().map(|q| q.kg.row.clone()).collect();

        Ok(EvalReport {
            config: EvalConfig::snapshot(cfg, &self.embedder_label, &self.llm_label),
            questions,
            baseline_mean: aggregate(&baseline_rows)?,
            kg_mean: aggregate(&kg_rows)?,
        })
    }
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Markdown comparison tables: P/R/F1 per metric per mode, BLEU-1, and a
/// latency table.
pub fn report_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let n = report.questions.len();
    let _ = writeln!(out, "# Evaluation Report\n");
    let _ = writeln!(
        out,
        "Modes: baseline (raw text retrieval) vs. kg (knowledge-graph retrieval). \
         {n} questions, k={}, embedder={}, llm={}.\n",
        report.config.k, report.config.embedder, report.config.llm
    );

    let _ = writeln!(out, "## ROUGE (mean over {n} questions)\n");
    let _ = writeln!(out, "| Mode | Metric | Precision | Recall | F1 |");
    let _ = writeln!(out, "|------|--------|-----------|--------|----|");
    for (mode, mean) in [("Baseline", &report.baseline_mean), ("Our Approach", &report.kg_mean)] {
        for (name, triple) in [
            ("ROUGE-1", &mean.rouge1),
            ("ROUGE-2", &mean.rouge2),
            ("ROUGE-L", &mean.rouge_l),
        ] {
            let _ = writeln!(
                out,
                "| {mode} | {name} | {} | {} | {} |",
                fmt3(triple.precision),
                fmt3(triple.recall),
                fmt3(triple.f1)
            );
        }
    }

    let _ = writeln!(out, "\n## BLEU-1 (mean over {n} questions)\n");
    let _ = writeln!(out, "| Mode | BLEU-1 |");
    let _ = writeln!(out, "|------|--------|");
    let _ = writeln!(out, "| Baseline | {} |", fmt3(report.baseline_mean.bleu1));
    let _ = writeln!(out, "| Our Approach | {} |", fmt3(report.kg_mean.bleu1));

    let _ = writeln!(out, "\n## Execution times\n");
    let _ = writeln!(out, "| LLM Model | Parameters | Baseline | Our Approach |");
    let _ = writeln!(out, "|-----------|------------|----------|--------------|");
    let _ = writeln!(
        out,
        "| {} | - | {} | {} |",
        report.config.llm,
        fmt3(report.baseline_mean.latency_seconds),
        fmt3(report.kg_mean.latency_seconds)
    );

    let _ = writeln!(out, "\n## Per-question ROUGE-1 F1\n");
    let _ = writeln!(out, "| QA id | Baseline | Our Approach | Note |");
    let _ = writeln!(out, "|-------|----------|--------------|------|");
    for q in &report.questions {
        let note = q
            .baseline
            .note
            .iter()
            .chain(q.kg.note.iter())
            .cloned()
            .collect::<Vec<_>>()
            .join("; ");
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            q.qa_id,
            fmt3(q.baseline.row.rouge1.f1),
            fmt3(q.kg.row.rouge1.f1),
            note
        );
    }
    out
}

/// Write `report.json` and `report.md` into `dir`; byte-deterministic for a
/// given report.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), HarnessError> {
    let dir = dir.as_ref();
    let io_err = |path: &Path, source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let json_path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;

    let md_path = dir.join("report.md");
    std::fs::write(&md_path, report_markdown(report)).map_err(|e| io_err(&md_path, e))?;

    Ok((json_path, md_path))
}
