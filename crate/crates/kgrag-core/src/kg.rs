//! Personal knowledge graph: triple construction from calendar and
//! conversation data, subject-verb-object extraction, linearization to
//! embeddable text, and DOT/TSV export.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dataset_io::{Calendar, ConversationMessage};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("label contains a tab or newline, not representable in TSV: {0:?}")]
    UnrepresentableLabel(String),
    #[error("malformed TSV at line {line}: expected 4 tab-separated fields")]
    MalformedTsv { line: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One edge of the knowledge graph. `provenance` names the source document
/// (calendar month key or `conversation_id:seq`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub source: String,
    pub relation: String,
    pub target: String,
    pub provenance: String,
}

impl Triple {
    pub fn new(
        source: impl Into<String>,
        relation: impl Into<String>,
        target: impl Into<String>,
        provenance: impl Into<String>,
    ) -> Self {
        Triple {
            source: source.into(),
            relation: relation.into(),
            target: target.into(),
            provenance: provenance.into(),
        }
    }

    fn key(&self) -> (String, String, String) {
        (
            self.source.clone(),
            self.relation.clone(),
            self.target.clone(),
        )
    }
}

/// Ordered, duplicate-free set of triples. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    /// Build from a triple list, collapsing duplicate (source, relation,
    /// target) entries and keeping first-occurrence order.
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in triples {
            if seen.insert(t.key()) {
                out.push(t);
            }
        }
        KnowledgeGraph { triples: out }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Union of all source and target labels.
    pub fn nodes(&self) -> HashSet<&str> {
        self.triples
            .iter()
            .flat_map(|t| [t.source.as_str(), t.target.as_str()])
            .collect()
    }

    /// Union preserving `a`'s order followed by `b`'s novel triples.
    pub fn merge(&self, other: &KnowledgeGraph) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            self.triples
                .iter()
                .chain(other.triples.iter())
                .cloned(),
        )
    }

    /// One sentence-like line per triple: `"<source> <relation> <target>."`,
    /// paired with the triple's provenance.
    pub fn linearize(&self) -> Vec<(String, String)> {
        self.triples
            .iter()
            .map(|t| {
                (
                    format!("{} {} {}.", t.source, t.relation, t.target),
                    t.provenance.clone(),
                )
            })
            .collect()
    }

    /// Graphviz DOT rendering with one labeled edge per triple.
    pub fn export_dot(&self) -> String {
        fn escape(s: &str) -> String {
            s.replace('\\', "\\\\").replace('"', "\\\"")
        }
        let mut out = String::from("digraph kg {\n");
        for t in &self.triples {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(&t.source),
                escape(&t.target),
                escape(&t.relation)
            );
        }
        out.push_str("}\n");
        out
    }

    /// Tab-separated persistence: source, relation, target, provenance.
    pub fn to_tsv(&self) -> Result<String, KgError> {
        let mut out = String::new();
        for t in &self.triples {
            for field in [&t.source, &t.relation, &t.target, &t.provenance] {
                if field.contains('\t') || field.contains('\n') {
                    return Err(KgError::UnrepresentableLabel(field.clone()));
                }
            }
            let _ = writeln!(out, "{}\t{}\t{}\t{}", t.source, t.relation, t.target, t.provenance);
        }
        Ok(out)
    }

    pub fn from_tsv(text: &str) -> Result<KnowledgeGraph, KgError> {
        let mut triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(KgError::MalformedTsv { line: i + 1 });
            }
            triples.push(Triple::new(fields[0], fields[1], fields[2], fields[3]));
        }
        Ok(KnowledgeGraph::from_triples(triples))
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), KgError> {
        std::fs::write(path, self.to_tsv()?)?;
        Ok(())
    }
}

/// Pluggable sentence-to-triples extractor. The labels come back without
/// provenance; callers attach it.
pub trait TripleExtractor: Sync {
    fn extract(&self, sentence: &str) -> Vec<SvoTriple>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvoTriple {
    pub source: String,
    pub relation: String,
    pub target: String,
}

/// English verb base forms recognized by [`RuleBasedExtractor`]. Lookup is on
/// the stemmed token; the surface form is kept as the relation label.
const VERB_LEXICON: &[&str] = &[
    "am", "are", "arrive", "ask", "attend", "bake", "be", "been", "being", "book", "bring",
    "buy", "call", "cancel", "celebrate", "check", "choose", "clean", "climb", "come", "confirm",
    "cook", "design", "discuss", "draft", "drive", "eat", "email", "enjoy", "fetch", "find",
    "finish", "fix", "get", "give", "go", "grab", "had", "happen", "has", "have", "help", "hike",
    "host", "invite", "is", "join", "know", "launch", "learn", "leave", "like", "look", "love",
    "make", "meet", "miss", "move", "need", "order", "organize", "pack", "paint", "pick", "plan",
    "play", "prepare", "promise", "read", "recommend", "remind", "rent", "reserve", "review",
    "ride", "run", "save", "say", "schedule", "see", "send", "share", "shop", "sign", "sing",
    "skip", "start", "stay", "study", "suggest", "swim", "take", "talk", "teach", "tell", "text",
    "thank", "think", "train", "travel", "try", "visit", "wait", "walk", "want", "was", "watch",
    "were", "work", "write",
];

/// Default extractor: first token whose stemmed form is in the verb lexicon
/// becomes the relation; words before it are the source, words after the
/// target. Extraction failure yields an empty list, never an error.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedExtractor;

impl RuleBasedExtractor {
    fn is_verb(token: &str) -> bool {
        let norm: String = token
            .to_lowercase()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_string();
        if norm.is_empty() {
            return false;
        }
        let mut candidates = vec![norm.clone()];
        // -s / -ed / -ing stripping, with the dropped-e variants.
        if let Some(stem) = norm.strip_suffix("ing") {
            if stem.len() >= 2 {
                candidates.push(stem.to_string());
                candidates.push(format!("{stem}e"));
            }
        }
        if let Some(stem) = norm.strip_suffix("ed") {
            if stem.len() >= 2 {
                candidates.push(stem.to_string());
                candidates.push(format!("{stem}e"));
            }
        }
        if let Some(stem) = norm.strip_suffix('s') {
            if stem.len() >= 2 {
                candidates.push(stem.to_string());
            }
        }
        if let Some(stem) = norm.strip_suffix("es") {
            if stem.len() >= 2 {
                candidates.push(stem.to_string());
            }
        }
        candidates
            .iter()
            .any(|c| VERB_LEXICON.binary_search(&c.as_str()).is_ok())
    }

    fn trim_edges(s: &str) -> &str {
        s.trim_matches(|c: char| !c.is_alphanumeric())
    }
}

impl TripleExtractor for RuleBasedExtractor {
    fn extract(&self, sentence: &str) -> Vec<SvoTriple> {
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        let Some(verb_idx) = tokens.iter().position(|t| Self::is_verb(t)) else {
            return Vec::new();
        };
        let source = Self::trim_edges(&tokens[..verb_idx].join(" ")).to_string();
        let target = Self::trim_edges(&tokens[verb_idx + 1..].join(" ")).to_string();
        if source.is_empty() || target.is_empty() {
            return Vec::new();
        }
        let relation = Self::trim_edges(tokens[verb_idx]).to_string();
        vec![SvoTriple {
            source,
            relation,
            target,
        }]
    }
}

/// Convenience free function mirroring the extractor contract.
pub fn extract_svo(sentence: &str, extractor: &dyn TripleExtractor) -> Vec<SvoTriple> {
    extractor.extract(sentence)
}

/// Three triples per event, in calendar order. The event node label carries
/// the date suffix so recurring titles stay distinct.
pub fn calendar_to_triples(cal: &Calendar) -> Vec<Triple> {
    let mut out = Vec::with_capacity(cal.event_count() * 3);
    for (month, event) in cal.events() {
        let date = event.date.format("%Y-%m-%d").to_string();
        let label = format!("{} on {}", event.title, date);
        out.push(Triple::new(cal.owner.clone(), "has event", label.clone(), month));
        out.push(Triple::new(label.clone(), "date", date, month));
        out.push(Triple::new(label, "time", event.time.to_string(), month));
    }
    out
}

/// One structural `(sender, "said in", conversation_id)` triple per message
/// plus whatever SVO extraction finds in the text. Duplicates collapsed,
/// first occurrence wins.
pub fn conversation_to_triples(
    messages: &[ConversationMessage],
    extractor: &dyn TripleExtractor,
) -> Vec<Triple> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |t: Triple| {
        if seen.insert(t.key()) {
            out.push(t);
        }
    };
    for m in messages {
        let prov = format!("{}:{}", m.conversation_id, m.seq);
        push(Triple::new(
            m.sender.clone(),
            "said in",
            m.conversation_id.clone(),
            prov.clone(),
        ));
        for svo in extractor.extract(&m.text) {
            push(Triple {
                source: svo.source,
                relation: svo.relation,
                target: svo.target,
                provenance: prov.clone(),
            });
        }
    }
    out
}
