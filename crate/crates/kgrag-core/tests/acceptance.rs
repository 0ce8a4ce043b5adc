//! Acceptance suite: one test per shipping criterion, each checked against
//! independent brute-force oracles or golden fixtures and printing a
//! `criterion N ...: pass` line (visible with `--nocapture`).

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgrag_core::clock::FixedStepClock;
use kgrag_core::dataset_io::{
    calendar_to_json, conversations_to_jsonl, load_calendar, load_conversations, load_qa_pairs,
    qa_pairs_to_json,
};
use kgrag_core::embed::{EmbeddingProvider, EmbeddingVector, HashEmbedder};
use kgrag_core::harness::{emit_report, EvalReport, Harness};
use kgrag_core::index::{build_index, top_k, ChunkKind, DocumentChunk, VectorIndex};
use kgrag_core::kg::{calendar_to_triples, KnowledgeGraph, RuleBasedExtractor};
use kgrag_core::llm::ExtractiveMockLlm;
use kgrag_core::metrics::{bleu, rouge_l, rouge_n};
use kgrag_core::pipeline::{self, build_kg_corpus, ChunkingConfig, Mode, PipelineConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

const TOL: f64 = 1e-9;

// ---- brute-force metric oracles -------------------------------------------
//
// These recount everything from scratch (quadratic scans, full DP tables)
// instead of reusing any library internals.

fn oracle_ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].iter().map(|t| t.to_string()).collect())
        .collect()
}

fn oracle_clipped_overlap(cand: &[&str], reff: &[&str], n: usize) -> usize {
    let cand_grams = oracle_ngrams(cand, n);
    let ref_grams = oracle_ngrams(reff, n);
    let mut distinct: Vec<&Vec<String>> = Vec::new();
    for g in &cand_grams {
        if !distinct.contains(&g) {
            distinct.push(g);
        }
    }
    distinct
        .iter()
        .map(|g| {
            let in_cand = cand_grams.iter().filter(|x| x == g).count();
            let in_ref = ref_grams.iter().filter(|x| x == g).count();
            in_cand.min(in_ref)
        })
        .sum()
}

fn oracle_rouge_n(cand: &[&str], reff: &[&str], n: usize) -> (f64, f64, f64) {
    let overlap = oracle_clipped_overlap(cand, reff, n) as f64;
    let cand_total = cand.len().saturating_sub(n - 1) as f64;
    let ref_total = reff.len().saturating_sub(n - 1) as f64;
    let p = if cand_total > 0.0 { overlap / cand_total } else { 0.0 };
    let r = if ref_total > 0.0 { overlap / ref_total } else { 0.0 };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

fn oracle_lcs(a: &[&str], b: &[&str]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

fn oracle_rouge_l(cand: &[&str], reff: &[&str]) -> (f64, f64, f64) {
    let lcs = oracle_lcs(cand, reff) as f64;
    let p = if cand.is_empty() { 0.0 } else { lcs / cand.len() as f64 };
    let r = if reff.is_empty() { 0.0 } else { lcs / reff.len() as f64 };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

fn oracle_bleu(cand: &[&str], reff: &[&str], max_n: usize) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 1..=max_n {
        let total = cand.len().saturating_sub(n - 1);
        if total == 0 {
            return 0.0;
        }
        let clipped = oracle_clipped_overlap(cand, reff, n);
        if clipped == 0 {
            return 0.0;
        }
        product *= clipped as f64 / total as f64;
    }
    let geo_mean = product.powf(1.0 / max_n as f64);
    let c = cand.len() as f64;
    let r = reff.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    geo_mean * brevity
}

fn random_tokens<'a>(rng: &mut ChaCha8Rng, alphabet: &[&'a str], max_len: usize) -> Vec<&'a str> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let started = Instant::now();
    let alphabet = ["alpha", "bravo", "delta", "echo", "kilo"];
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);

    for _ in 0..200 {
        let cand = random_tokens(&mut rng, &alphabet, 12);
        let reff = random_tokens(&mut rng, &alphabet, 12);
        let cand_text = cand.join(" ");
        let ref_text = reff.join(" ");

        for n in 1..=2usize {
            let got = rouge_n(&cand_text, &ref_text, n).unwrap();
            let (p, r, f1) = oracle_rouge_n(&cand, &reff, n);
            assert!((got.precision - p).abs() < TOL, "rouge-{n} precision on {cand:?} vs {reff:?}");
            assert!((got.recall - r).abs() < TOL, "rouge-{n} recall on {cand:?} vs {reff:?}");
            assert!((got.f1 - f1).abs() < TOL, "rouge-{n} f1 on {cand:?} vs {reff:?}");
        }
        let got = rouge_l(&cand_text, &ref_text);
        let (p, r, f1) = oracle_rouge_l(&cand, &reff);
        assert!((got.precision - p).abs() < TOL, "rouge-l precision on {cand:?} vs {reff:?}");
        assert!((got.recall - r).abs() < TOL, "rouge-l recall on {cand:?} vs {reff:?}");
        assert!((got.f1 - f1).abs() < TOL, "rouge-l f1 on {cand:?} vs {reff:?}");
    }

    for i in 0..100 {
        let cand = random_tokens(&mut rng, &alphabet, 12);
        let reff = random_tokens(&mut rng, &alphabet, 12);
        let max_n = 1 + (i % 4);
        let got = bleu(&cand.join(" "), &reff.join(" "), max_n).unwrap();
        let want = oracle_bleu(&cand, &reff, max_n);
        assert!((got - want).abs() < TOL, "bleu-{max_n} on {cand:?} vs {reff:?}: {got} vs {want}");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("criterion 1 (metric oracle equivalence): pass in {elapsed:?}");
}

// ---- retrieval oracle ------------------------------------------------------

/// Provider that hands out pre-generated random unit vectors keyed by chunk
/// text, so the index holds exactly the vectors the oracle sees.
struct FixedVectors {
    dimension: usize,
    by_text: HashMap<String, EmbeddingVector>,
}

impl EmbeddingProvider for FixedVectors {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(
        &self,
        texts: &[&str],
    ) -> Result<Vec<EmbeddingVector>, kgrag_core::embed::EmbedError> {
        Ok(texts.iter().map(|t| self.by_text[*t].clone()).collect())
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dimension: usize) -> EmbeddingVector {
    let values: Vec<f32> = (0..dimension).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingVector::normalized(values)
}

/// Repeated full-scan max extraction; no shared sorting code with `top_k`.
fn oracle_top_k(index: &VectorIndex, query: &EmbeddingVector, k: usize) -> Vec<(String, f32)> {
    let scored: Vec<(String, f32)> = index
        .entries()
        .map(|(v, id)| (id.to_string(), kgrag_core::embed::cosine(query, v)))
        .collect();
    let mut taken = vec![false; scored.len()];
    let mut out = Vec::new();
    for _ in 0..k.min(scored.len()) {
        let mut best: Option<usize> = None;
        for (i, (_, score)) in scored.iter().enumerate() {
            if taken[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if *score > scored[b].1 => best = Some(i),
                _ => {}
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(scored[b].clone());
    }
    out
}

#[test]
fn criterion_2_retrieval_exactness() {
    let started = Instant::now();
    let dimension = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);

    let mut by_text = HashMap::new();
    let chunks: Vec<DocumentChunk> = (0..1000)
        .map(|i| {
            let text = format!("entry {i}");
            by_text.insert(text.clone(), random_unit(&mut rng, dimension));
            DocumentChunk {
                chunk_id: format!("e{i}"),
                text,
                kind: ChunkKind::Raw,
                provenance: "oracle".into(),
            }
        })
        .collect();
    let provider = FixedVectors { dimension, by_text };
    let index = build_index(chunks, &provider).unwrap();

    for _ in 0..50 {
        let query = random_unit(&mut rng, dimension);
        for k in [1usize, 5, 50] {
            let got = top_k(&index, &query, k).unwrap();
            let want = oracle_top_k(&index, &query, k);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.0, w.0, "id order diverged at k={k}");
                assert_eq!(g.1, w.1, "score diverged at k={k}");
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("criterion 2 (retrieval exactness): pass in {elapsed:?}");
}

#[test]
fn criterion_3_kg_golden_file() {
    let cal = load_calendar(fixture("january_calendar.json")).unwrap();
    let triples = calendar_to_triples(&cal);
    assert_eq!(triples.len(), 9);
    let tsv = KnowledgeGraph::from_triples(triples).to_tsv().unwrap();
    let golden = std::fs::read_to_string(fixture("golden/january_triples.tsv")).unwrap();
    assert_eq!(tsv, golden);
    println!("criterion 3 (kg golden file): pass");
}

fn offline_harness<'a>(
    provider: &'a HashEmbedder,
    client: &'a ExtractiveMockLlm,
    clock: &'a FixedStepClock,
) -> Harness<'a> {
    Harness {
        provider,
        client,
        extractor: &RuleBasedExtractor,
        clock,
        embedder_label: "hash".into(),
        llm_label: "mock".into(),
    }
}

fn run_offline_eval(clock: &FixedStepClock) -> EvalReport {
    let provider = HashEmbedder::default();
    let client = ExtractiveMockLlm::default();
    let harness = offline_harness(&provider, &client, clock);
    harness
        .run_eval(
            &PipelineConfig::for_mode(Mode::Kg),
            fixture("calendar.json"),
            fixture("conversations.jsonl"),
            fixture("qa_pairs.json"),
        )
        .unwrap()
}

#[test]
fn criterion_4_end_to_end_fixture_reproduction() {
    let started = Instant::now();
    let cal = load_calendar(fixture("calendar.json")).unwrap();
    let convs = load_conversations(fixture("conversations.jsonl")).unwrap();
    let provider = HashEmbedder::default();
    let chunks =
        build_kg_corpus(&cal, &convs, &RuleBasedExtractor, ChunkingConfig::default()).unwrap();
    let index = build_index(chunks, &provider).unwrap();
    let cfg = PipelineConfig::for_mode(Mode::Kg);
    let client = ExtractiveMockLlm::default();
    let clock = FixedStepClock::new(0.001);

    let answer = pipeline::answer(
        "What is the event on August 19th, 2024?",
        &index,
        &provider,
        &client,
        &cfg,
        &clock,
    )
    .unwrap();
    assert!(
        answer.text.contains("Raksha Bandhan"),
        "kg answer was {:?}",
        answer.text
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    println!("criterion 4 (end-to-end fixture reproduction): pass in {elapsed:?}");
}

#[test]
fn criterion_5_directional_result() {
    let clock = FixedStepClock::new(0.001);
    let report = run_offline_eval(&clock);
    assert!(report.questions.len() >= 20);
    let baseline = report.baseline_mean.rouge1.f1;
    let kg = report.kg_mean.rouge1.f1;
    assert!(
        kg >= baseline,
        "kg mean ROUGE-1 F1 {kg:.3} fell below baseline {baseline:.3}"
    );
    println!(
        "criterion 5 (directional result): pass, kg {kg:.3} >= baseline {baseline:.3}"
    );
}

#[test]
fn criterion_6_timing_report() {
    let started = Instant::now();
    let clock = FixedStepClock::new(0.001);
    let report = run_offline_eval(&clock);
    let md = kgrag_core::harness::report_markdown(&report);
    assert!(
        md.contains("| LLM Model | Parameters | Baseline | Our Approach |"),
        "latency table header missing:\n{md}"
    );
    assert!(report.baseline_mean.latency_seconds >= 0.0);
    assert!(report.kg_mean.latency_seconds >= 0.0);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("criterion 6 (timing report): pass in {elapsed:?}");
}

#[test]
fn criterion_7_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (json_a, _) = emit_report(&run_offline_eval(&FixedStepClock::new(0.001)), dir_a.path()).unwrap();
    let (json_b, _) = emit_report(&run_offline_eval(&FixedStepClock::new(0.001)), dir_b.path()).unwrap();
    let bytes_a = std::fs::read(json_a).unwrap();
    let bytes_b = std::fs::read(json_b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "report.json differed between runs");
    println!("criterion 7 (determinism): pass, {} bytes identical", bytes_a.len());
}

#[test]
fn criterion_8_round_trips() {
    let dir = tempfile::tempdir().unwrap();

    let cal = load_calendar(fixture("calendar.json")).unwrap();
    let cal_path = dir.path().join("calendar.json");
    std::fs::write(&cal_path, serde_json::to_string_pretty(&calendar_to_json(&cal)).unwrap())
        .unwrap();
    assert_eq!(load_calendar(&cal_path).unwrap(), cal);

    let january = load_calendar(fixture("january_calendar.json")).unwrap();
    std::fs::write(&cal_path, serde_json::to_string_pretty(&calendar_to_json(&january)).unwrap())
        .unwrap();
    assert_eq!(load_calendar(&cal_path).unwrap(), january);

    let convs = load_conversations(fixture("conversations.jsonl")).unwrap();
    let conv_path = dir.path().join("conversations.jsonl");
    std::fs::write(&conv_path, conversations_to_jsonl(&convs)).unwrap();
    assert_eq!(load_conversations(&conv_path).unwrap(), convs);

    let pairs = load_qa_pairs(fixture("qa_pairs.json")).unwrap();
    let qa_path = dir.path().join("qa_pairs.json");
    std::fs::write(&qa_path, qa_pairs_to_json(&pairs)).unwrap();
    assert_eq!(load_qa_pairs(&qa_path).unwrap(), pairs);

    let report = run_offline_eval(&FixedStepClock::new(0.001));
    let (json_path, _) = emit_report(&report, dir.path()).unwrap();
    let parsed: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(parsed, report);

    println!("criterion 8 (round-trips): pass");
}
