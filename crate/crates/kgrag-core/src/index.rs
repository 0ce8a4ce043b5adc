//! Document chunking and the exact (flat) cosine top-k index, with on-disk
//! persistence as a JSON sidecar plus a little-endian float32 vector file.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbeddingProvider, EmbeddingVector};

/// Magic prefix of the binary vector file.
pub const INDEX_MAGIC: &[u8; 8] = b"KGRAGIDX";

pub const DEFAULT_MAX_CHARS: usize = 512;
pub const DEFAULT_OVERLAP_CHARS: usize = 64;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("invalid chunk params: max_chars={max_chars}, overlap_chars={overlap_chars} (need max_chars >= 64 and overlap < max_chars)")]
    InvalidChunkParams {
        max_chars: usize,
        overlap_chars: usize,
    },
    #[error("duplicate chunk id {0:?}")]
    DuplicateChunkId(String),
    #[error("query dimension {query} does not match index dimension {index}")]
    DimensionMismatch { query: usize, index: usize },
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt index file {path}: {message}")]
    Corrupt { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkKind {
    Raw,
    Kg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: String,
    pub text: String,
    pub kind: ChunkKind,
    pub provenance: String,
}

/// A source document to be chunked: text plus provenance id.
#[derive(Debug, Clone)]
pub struct SourceDoc {
    pub text: String,
    pub provenance: String,
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte spans of the chunk windows for one document. Splits at whitespace
/// boundaries; windows hold at most `max_chars` characters and consecutive
/// windows share up to `overlap_chars` characters.
pub fn chunk_spans(text: &str, max_chars: usize, overlap_chars: usize) -> Vec<(usize, usize)> {
    // Words as byte spans, with any word longer than max_chars hard-split.
    let mut atoms: Vec<(usize, usize)> = Vec::new();
    let mut word_start: Option<usize> = None;
    let push_word = |start: usize, end: usize, atoms: &mut Vec<(usize, usize)>| {
        let word = &text[start..end];
        if char_len(word) <= max_chars {
            atoms.push((start, end));
        } else {
            let mut piece_start = start;
            let mut count = 0;
            for (off, _) in word.char_indices() {
                if count == max_chars {
                    atoms.push((piece_start, start + off));
                    piece_start = start + off;
                    count = 0;
                }
                count += 1;
            }
            atoms.push((piece_start, end));
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(start) = word_start.take() {
                push_word(start, i, &mut atoms);
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(start) = word_start {
        push_word(start, text.len(), &mut atoms);
    }

    let mut spans = Vec::new();
    let mut i = 0;
    while i < atoms.len() {
        let start = atoms[i].0;
        let mut j = i;
        while j + 1 < atoms.len() && char_len(&text[start..atoms[j + 1].1]) <= max_chars {
            j += 1;
        }
        let end = atoms[j].1;
        spans.push((start, end));
        if j + 1 >= atoms.len() {
            break;
        }
        // Next window starts on the earliest trailing atom that keeps the
        // shared region within overlap_chars; always advances past atom i.
        let mut next = j + 1;
        for m in (i + 1)..=j {
            if char_len(&text[atoms[m].0..end]) <= overlap_chars {
                next = m;
                break;
            }
        }
        i = next;
    }
    spans
}

/// Split documents into overlapping whitespace-aligned chunks with ids
/// `"<provenance>#<i>"`.
pub fn chunk_documents(
    docs: &[SourceDoc],
    max_chars: usize,
    overlap_chars: usize,
    kind: ChunkKind,
) -> Result<Vec<DocumentChunk>, IndexError> {
    if max_chars < 64 || overlap_chars >= max_chars {
        return Err(IndexError::InvalidChunkParams {
            max_chars,
            overlap_chars,
        });
    }
    let mut chunks = Vec::new();
    for doc in docs {
        for (i, (start, end)) in chunk_spans(&doc.text, max_chars, overlap_chars)
            .into_iter()
            .enumerate()
        {
            chunks.push(DocumentChunk {
                chunk_id: format!("{}#{}", doc.provenance, i),
                text: doc.text[start..end].to_string(),
                kind,
                provenance: doc.provenance.clone(),
            });
        }
    }
    Ok(chunks)
}

/// Exact flat vector index. Immutable after build; reads are lock-free.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    entries: Vec<(EmbeddingVector, String)>,
    chunks: HashMap<String, DocumentChunk>,
    dimension: usize,
}

impl VectorIndex {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&DocumentChunk> {
        self.chunks.get(chunk_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EmbeddingVector, &str)> {
        self.entries.iter().map(|(v, id)| (v, id.as_str()))
    }
}

/// Embed all chunks with `provider` and build the index in input order.
pub fn build_index(
    chunks: Vec<DocumentChunk>,
    provider: &dyn EmbeddingProvider,
) -> Result<VectorIndex, IndexError> {
    let mut by_id = HashMap::with_capacity(chunks.len());
    for chunk in &chunks {
        if by_id.insert(chunk.chunk_id.clone(), chunk.clone()).is_some() {
            return Err(IndexError::DuplicateChunkId(chunk.chunk_id.clone()));
        }
    }
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = provider.embed_batch(&texts)?;
    let entries = vectors
        .into_iter()
        .zip(&chunks)
        .map(|(v, c)| (v, c.chunk_id.clone()))
        .collect();
    Ok(VectorIndex {
        entries,
        chunks: by_id,
        dimension: provider.dimension(),
    })
}

/// Exact top-k by dot product (cosine for unit vectors; 0 for zero vectors).
/// Descending score, ties broken by insertion order.
pub fn top_k(
    index: &VectorIndex,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(String, f32)>, IndexError> {
    if query.len() != index.dimension {
        return Err(IndexError::DimensionMismatch {
            query: query.len(),
            index: index.dimension,
        });
    }
    let mut scored: Vec<(usize, f32)> = index
        .entries
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (i, crate::embed::cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(i, score)| (index.entries[i].1.clone(), score))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct IndexSidecar {
    dimension: usize,
    chunks: Vec<DocumentChunk>,
}

impl VectorIndex {
    /// Persist as `<stem>.json` (chunks in entry order) plus `<stem>.vec`
    /// (16-byte header, then row-major little-endian f32).
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<(), IndexError> {
        let stem = stem.as_ref();
        let io_err = |path: &Path, source| IndexError::Io {
            path: path.display().to_string(),
            source,
        };

        let ordered_chunks: Vec<DocumentChunk> = self
            .entries
            .iter()
            .map(|(_, id)| self.chunks[id].clone())
            .collect();
        let sidecar = IndexSidecar {
            dimension: self.dimension,
            chunks: ordered_chunks,
        };
        let json_path = stem.with_extension("json");
        fs::write(
            &json_path,
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
        )
        .map_err(|e| io_err(&json_path, e))?;

        let vec_path = stem.with_extension("vec");
        let mut file = fs::File::create(&vec_path).map_err(|e| io_err(&vec_path, e))?;
        file.write_all(INDEX_MAGIC).map_err(|e| io_err(&vec_path, e))?;
        file.write_all(&(self.dimension as u32).to_le_bytes())
            .map_err(|e| io_err(&vec_path, e))?;
        file.write_all(&(self.entries.len() as u32).to_le_bytes())
            .map_err(|e| io_err(&vec_path, e))?;
        for (v, _) in &self.entries {
            for x in v.values() {
                file.write_all(&x.to_le_bytes()).map_err(|e| io_err(&vec_path, e))?;
            }
        }
        Ok(())
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<VectorIndex, IndexError> {
        let stem = stem.as_ref();
        let json_path = stem.with_extension("json");
        let vec_path = stem.with_extension("vec");
        let io_err = |path: &Path, source| IndexError::Io {
            path: path.display().to_string(),
            source,
        };
        let corrupt = |path: &Path, message: String| IndexError::Corrupt {
            path: path.display().to_string(),
            message,
        };

        let sidecar: IndexSidecar = serde_json::from_str(
            &fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?,
        )
        .map_err(|e| corrupt(&json_path, e.to_string()))?;

        let mut file = fs::File::open(&vec_path).map_err(|e| io_err(&vec_path, e))?;
        let mut header = [0u8; 16];
        file.read_exact(&mut header)
            .map_err(|e| io_err(&vec_path, e))?;
        if &header[0..8] != INDEX_MAGIC {
            return Err(corrupt(&vec_path, "bad magic".into()));
        }
        let dimension = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if dimension != sidecar.dimension || count != sidecar.chunks.len() {
            return Err(corrupt(
                &vec_path,
                format!(
                    "header ({dimension} x {count}) disagrees with sidecar ({} x {})",
                    sidecar.dimension,
                    sidecar.chunks.len()
                ),
            ));
        }

        let mut payload = Vec::new();
        file.read_to_end(&mut payload)
            .map_err(|e| io_err(&vec_path, e))?;
        if payload.len() != dimension * count * 4 {
            return Err(corrupt(&vec_path, "truncated vector payload".into()));
        }

        let mut entries = Vec::with_capacity(count);
        let mut chunks = HashMap::with_capacity(count);
        for (row, chunk) in sidecar.chunks.into_iter().enumerate() {
            let mut values = Vec::with_capacity(dimension);
            for col in 0..dimension {
                let off = (row * dimension + col) * 4;
                values.push(f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()));
            }
            let nonzero = values.iter().any(|x| *x != 0.0);
            let vector = if nonzero {
                // Stored vectors are already unit; renormalizing keeps the
                // invariant exact after the f32 round-trip.
                EmbeddingVector::normalized(values)
            } else {
                EmbeddingVector::zero(dimension)
            };
            if chunks.insert(chunk.chunk_id.clone(), chunk.clone()).is_some() {
                return Err(IndexError::DuplicateChunkId(chunk.chunk_id));
            }
            entries.push((vector, chunk.chunk_id));
        }
        Ok(VectorIndex {
            entries,
            chunks,
            dimension,
        })
    }
}
