//! From-scratch ROUGE-1/2/L and BLEU scoring against golden answers, plus
//! per-run aggregation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("max_n must be between 1 and 4, got {0}")]
    InvalidN(usize),
    #[error("cannot aggregate an empty row list")]
    EmptyInput,
}

/// Precision / recall / F1, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreTriple {
            precision,
            recall,
            f1,
        }
    }
}

/// Per-question metric row. `qa_id` is "MEAN" for aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub qa_id: String,
    pub rouge1: ScoreTriple,
    pub rouge2: ScoreTriple,
    pub rouge_l: ScoreTriple,
    pub bleu1: f64,
    pub latency_seconds: f64,
}

impl MetricRow {
    pub fn zeroed(qa_id: impl Into<String>) -> Self {
        MetricRow {
            qa_id: qa_id.into(),
            rouge1: ScoreTriple::default(),
            rouge2: ScoreTriple::default(),
            rouge_l: ScoreTriple::default(),
            bleu1: 0.0,
            latency_seconds: 0.0,
        }
    }

    /// Score `candidate` against `reference` with all bundled metrics.
    pub fn score(
        qa_id: impl Into<String>,
        candidate: &str,
        reference: &str,
        latency_seconds: f64,
    ) -> Self {
        MetricRow {
            qa_id: qa_id.into(),
            rouge1: rouge_n(candidate, reference, 1).expect("n=1 is valid"),
            rouge2: rouge_n(candidate, reference, 2).expect("n=2 is valid"),
            rouge_l: rouge_l(candidate, reference),
            bleu1: bleu(candidate, reference, 1).expect("max_n=1 is valid"),
            latency_seconds,
        }
    }
}

/// Lowercase and split on maximal runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N: clipped n-gram overlap divided by candidate (precision) and
/// reference (recall) n-gram totals.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<ScoreTriple, MetricsError> {
    if !(1..=2).contains(&n) {
        return Err(MetricsError::InvalidN(n));
    }
    let cand = tokenize(candidate);
    let reff = tokenize(reference);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&reff, n);

    let overlap: usize = cand_counts
        .iter()
        .map(|(gram, count)| count.min(ref_counts.get(gram).unwrap_or(&0)))
        .sum();
    let cand_total = cand.len().saturating_sub(n - 1);
    let ref_total = reff.len().saturating_sub(n - 1);

    let precision = if cand_total > 0 {
        overlap as f64 / cand_total as f64
    } else {
        0.0
    };
    let recall = if ref_total > 0 {
        overlap as f64 / ref_total as f64
    } else {
        0.0
    };
    Ok(ScoreTriple::from_pr(precision, recall))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L over the whole answer as one token sequence.
pub fn rouge_l(candidate: &str, reference: &str) -> ScoreTriple {
    let cand = tokenize(candidate);
    let reff = tokenize(reference);
    let lcs = lcs_len(&cand, &reff) as f64;
    let precision = if cand.is_empty() { 0.0 } else { lcs / cand.len() as f64 };
    let recall = if reff.is_empty() { 0.0 } else { lcs / reff.len() as f64 };
    ScoreTriple::from_pr(precision, recall)
}

/// BLEU with uniform weights, clipped n-gram precisions, and no smoothing.
/// Any zero precision (or an empty candidate) yields 0.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, MetricsError> {
    if !(1..=4).contains(&max_n) {
        return Err(MetricsError::InvalidN(max_n));
    }
    let cand = tokenize(candidate);
    let reff = tokenize(reference);
    if cand.is_empty() {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&reff, n);
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, count)| count.min(ref_counts.get(gram).unwrap_or(&0)))
            .sum();
        let total = cand.len().saturating_sub(n - 1);
        if total == 0 || clipped == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let geo_mean = (log_sum / max_n as f64).exp();

    let c = cand.len() as f64;
    let r = reff.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(geo_mean * brevity)
}

/// Arithmetic mean of every numeric field; `qa_id` becomes "MEAN". The mean
/// F1 is the mean of per-row F1 values, not F1 of the mean P/R.
pub fn aggregate(rows: &[MetricRow]) -> Result<MetricRow, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = rows.len() as f64;
    let mean_triple = |get: &dyn Fn(&MetricRow) -> ScoreTriple| ScoreTriple {
        precision: rows.iter().map(|r| get(r).precision).sum::<f64>() / n,
        recall: rows.iter().map(|r| get(r).recall).sum::<f64>() / n,
        f1: rows.iter().map(|r| get(r).f1).sum::<f64>() / n,
    };
    Ok(MetricRow {
        qa_id: "MEAN".to_string(),
        rouge1: mean_triple(&|r| r.rouge1),
        rouge2: mean_triple(&|r| r.rouge2),
        rouge_l: mean_triple(&|r| r.rouge_l),
        bleu1: rows.iter().map(|r| r.bleu1).sum::<f64>() / n,
        latency_seconds: rows.iter().map(|r| r.latency_seconds).sum::<f64>() / n,
    })
}
