//! Randomized invariants over the metric, graph, chunking, embedding, and
//! retrieval kernels.

use proptest::collection::vec;
use proptest::prelude::*;

use kgrag_core::embed::{hash_embed, EmbeddingVector, HashEmbedder};
use kgrag_core::index::{build_index, chunk_spans, top_k, ChunkKind, DocumentChunk};
use kgrag_core::kg::{KnowledgeGraph, Triple};
use kgrag_core::metrics::{bleu, rouge_l, rouge_n, tokenize};

fn token_lists() -> impl Strategy<Value = String> {
    vec(prop_oneof!["alpha", "bravo", "delta", "echo", "kilo"], 0..12)
        .prop_map(|tokens| tokens.join(" "))
}

fn triples() -> impl Strategy<Value = Triple> {
    (
        prop_oneof!["Alex", "Sam", "Priya", "Jordan"],
        prop_oneof!["has event", "said in", "booked", "planned"],
        "[a-z]{1,8}",
    )
        .prop_map(|(s, r, t)| Triple {
            source: s.to_string(),
            relation: r.to_string(),
            target: t,
            provenance: "prop".into(),
        })
}

fn in_unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x) && x.is_finite()
}

proptest! {
    #[test]
    fn rouge_scores_stay_in_unit_interval(a in token_lists(), b in token_lists()) {
        for n in 1..=2usize {
            let s = rouge_n(&a, &b, n).unwrap();
            prop_assert!(in_unit_interval(s.precision));
            prop_assert!(in_unit_interval(s.recall));
            prop_assert!(in_unit_interval(s.f1));
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
        }
        let s = rouge_l(&a, &b);
        prop_assert!(in_unit_interval(s.precision));
        prop_assert!(in_unit_interval(s.recall));
        prop_assert!(in_unit_interval(s.f1));
    }

    #[test]
    fn rouge_swaps_precision_and_recall(a in token_lists(), b in token_lists()) {
        for n in 1..=2usize {
            let fwd = rouge_n(&a, &b, n).unwrap();
            let rev = rouge_n(&b, &a, n).unwrap();
            prop_assert!((fwd.precision - rev.recall).abs() < 1e-12);
            prop_assert!((fwd.recall - rev.precision).abs() < 1e-12);
        }
        let fwd = rouge_l(&a, &b);
        let rev = rouge_l(&b, &a);
        prop_assert!((fwd.precision - rev.recall).abs() < 1e-12);
        prop_assert!((fwd.recall - rev.precision).abs() < 1e-12);
    }

    #[test]
    fn lcs_bounded_by_shorter_sequence(a in token_lists(), b in token_lists()) {
        let s = rouge_l(&a, &b);
        let (na, nb) = (tokenize(&a).len(), tokenize(&b).len());
        let bound = na.min(nb) as f64;
        if na > 0 {
            prop_assert!(s.precision * na as f64 <= bound + 1e-9);
        }
    }

    #[test]
    fn identical_texts_score_one(a in token_lists()) {
        prop_assume!(!tokenize(&a).is_empty());
        let s = rouge_n(&a, &a, 1).unwrap();
        prop_assert!((s.f1 - 1.0).abs() < 1e-12);
        prop_assert!((bleu(&a, &a, 1).unwrap() - 1.0).abs() < 1e-12);
        let l = rouge_l(&a, &a);
        prop_assert!((l.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_stays_in_unit_interval(a in token_lists(), b in token_lists(), n in 1..=4usize) {
        prop_assert!(in_unit_interval(bleu(&a, &b, n).unwrap()));
    }

    #[test]
    fn graph_merge_is_idempotent_and_dedups(ts in vec(triples(), 0..20)) {
        let g = KnowledgeGraph::from_triples(ts.clone());
        let merged = g.merge(&g);
        prop_assert_eq!(merged.triples(), g.triples());
        let rebuilt = KnowledgeGraph::from_triples(ts.iter().cloned().chain(ts.clone()));
        prop_assert_eq!(rebuilt.triples(), g.triples());
    }

    #[test]
    fn graph_tsv_round_trips(ts in vec(triples(), 0..20)) {
        let g = KnowledgeGraph::from_triples(ts);
        let back = KnowledgeGraph::from_tsv(&g.to_tsv().unwrap()).unwrap();
        prop_assert_eq!(back.triples(), g.triples());
    }

    #[test]
    fn chunk_spans_cover_text(text in "[a-zA-Z0-9 .,]{0,400}", max in 64..200usize, overlap in 0..63usize) {
        let spans = chunk_spans(&text, max, overlap);
        if text.trim().is_empty() {
            prop_assert!(spans.is_empty());
            return Ok(());
        }
        // Non-whitespace content survives chunking in order. Whitespace at
        // span boundaries is dropped by design, so compare with it removed.
        let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut rebuilt = String::new();
        let mut covered_to = 0usize;
        for &(start, end) in &spans {
            prop_assert!(start < end && end <= text.len());
            prop_assert!(text[start..end].chars().count() <= max);
            let fresh = start.max(covered_to);
            if fresh < end {
                rebuilt.push_str(&text[fresh..end]);
                covered_to = end;
            }
        }
        let rebuilt_stripped: String =
            rebuilt.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(rebuilt_stripped, stripped);
    }

    #[test]
    fn embeddings_are_unit_or_zero(text in ".{0,80}") {
        let v = hash_embed(&text, 64);
        let norm: f32 = v.values().iter().map(|x| x * x).sum::<f32>().sqrt();
        prop_assert!(norm.abs() < 1e-5 || (norm - 1.0).abs() < 1e-5, "norm {norm}");
    }

    #[test]
    fn top_k_scores_are_sorted_and_complete(texts in vec("[a-z ]{4,40}", 1..30), k in 1..40usize) {
        let provider = HashEmbedder::new(64);
        let chunks: Vec<DocumentChunk> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| DocumentChunk {
                chunk_id: format!("c{i}"),
                text: t.clone(),
                kind: ChunkKind::Raw,
                provenance: "prop".into(),
            })
            .collect();
        let count = chunks.len();
        let index = build_index(chunks, &provider).unwrap();
        let query = hash_embed(&texts[0], 64);
        let hits = top_k(&index, &query, k).unwrap();
        prop_assert_eq!(hits.len(), k.min(count));
        for pair in hits.windows(2) {
            prop_assert!(pair[0].1 >= pair[1].1);
        }
        let all = top_k(&index, &query, count).unwrap();
        prop_assert_eq!(all.len(), count);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in ".{3,40}", b in ".{3,40}") {
        let va = hash_embed(&a, 64);
        let vb = hash_embed(&b, 64);
        let fwd = kgrag_core::embed::cosine(&va, &vb);
        let rev = kgrag_core::embed::cosine(&vb, &va);
        prop_assert!((fwd - rev).abs() < 1e-6);
        prop_assert!((-1.0 - 1e-5..=1.0 + 1e-5).contains(&fwd));
        let _ = EmbeddingVector::zero(64);
    }
}
