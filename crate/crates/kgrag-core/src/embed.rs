//! Embedding contract plus two providers: a deterministic character-3-gram
//! hashing embedder for offline runs and a client for remote embedding
//! services speaking the common `{"input": [...]}` JSON convention.

use serde::Deserialize;
use thiserror::Error;

/// Env var naming the remote embedding endpoint.
pub const EMBED_URL_ENV: &str = "KGRAG_EMBED_URL";
/// Env var holding an optional bearer token for the embedding endpoint.
pub const EMBED_TOKEN_ENV: &str = "KGRAG_EMBED_TOKEN";

/// Default dimension for [`HashEmbedder`].
pub const DEFAULT_HASH_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("transport error talking to embedding endpoint: {0}")]
    Transport(String),
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Fixed-dimension unit vector (or the zero vector for degenerate text).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm_flag: bool,
}

impl EmbeddingVector {
    /// L2-normalize raw values. A zero input stays zero with `norm_flag`
    /// false.
    pub fn normalized(mut values: Vec<f32>) -> Self {
        let norm = values.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v = (*v as f64 / norm) as f32;
            }
            EmbeddingVector {
                values,
                norm_flag: true,
            }
        } else {
            EmbeddingVector {
                values,
                norm_flag: false,
            }
        }
    }

    pub fn zero(dimension: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dimension],
            norm_flag: false,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True iff the vector had nonzero norm before normalization.
    pub fn is_nonzero(&self) -> bool {
        self.norm_flag
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f32 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Cosine similarity; defined as 0 when either vector is zero. Inputs are
/// unit vectors at the provider boundary, so this is a plain dot product.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f32 {
    if !a.is_nonzero() || !b.is_nonzero() {
        return 0.0;
    }
    a.dot(b)
}

pub trait EmbeddingProvider: Sync {
    fn dimension(&self) -> usize;

    /// Deterministic, index-aligned batch embedding.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }
}

// FNV-1a 64-bit, offset basis perturbed by a fixed seed so bucket layout is
// pinned across platforms.
const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x00000100000001b3;
const HASH_SEED: u64 = 0x6b67726167332d67;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ HASH_SEED;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic offline embedder: lowercase, hash every character 3-gram
/// into one of `dimension` buckets, accumulate counts, L2-normalize.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    /// `dimension` must be at least 16.
    pub fn new(dimension: usize) -> Self {
        assert!(dimension >= 16, "hash embedder dimension must be >= 16");
        HashEmbedder { dimension }
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        if chars.len() < 3 {
            return EmbeddingVector::zero(self.dimension);
        }
        let mut counts = vec![0.0f32; self.dimension];
        let mut buf = [0u8; 12];
        for gram in chars.windows(3) {
            let mut len = 0;
            for c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = (fnv1a(&buf[..len]) % self.dimension as u64) as usize;
            counts[bucket] += 1.0;
        }
        EmbeddingVector::normalized(counts)
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_HASH_DIM)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}

/// Standalone hash embedding, mirroring the provider method.
pub fn hash_embed(text: &str, dimension: usize) -> EmbeddingVector {
    HashEmbedder::new(dimension).embed(text)
}

#[derive(Deserialize)]
struct RemoteEmbeddingItem {
    index: usize,
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct RemoteEmbeddingResponse {
    data: Vec<RemoteEmbeddingItem>,
}

/// Client for an embeddings HTTP endpoint. The dimension is learned from a
/// probe request at construction and enforced afterwards.
pub struct RemoteEmbedder {
    endpoint: String,
    token: Option<String>,
    dimension: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Result<Self, EmbedError> {
        let mut this = RemoteEmbedder {
            endpoint: endpoint.into(),
            token,
            dimension: 0,
            client: reqwest::blocking::Client::new(),
        };
        let probe = this.request(&["dimension probe"])?;
        let dim = probe
            .first()
            .map(|v| v.len())
            .ok_or_else(|| EmbedError::Protocol("empty probe response".into()))?;
        if dim == 0 {
            return Err(EmbedError::Protocol("zero-dimension embedding".into()));
        }
        this.dimension = dim;
        Ok(this)
    }

    /// Build from `KGRAG_EMBED_URL` / `KGRAG_EMBED_TOKEN`.
    pub fn from_env() -> Result<Self, EmbedError> {
        let url = std::env::var(EMBED_URL_ENV)
            .map_err(|_| EmbedError::Protocol(format!("{EMBED_URL_ENV} is not set")))?;
        Self::new(url, std::env::var(EMBED_TOKEN_ENV).ok())
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "input": texts }));
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmbedError::Protocol(format!(
                "embedding endpoint returned {}",
                resp.status()
            )));
        }
        let body: RemoteEmbeddingResponse = resp
            .json()
            .map_err(|e| EmbedError::Protocol(format!("bad response body: {e}")))?;

        if body.data.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "requested {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        let mut items = body.data;
        items.sort_by_key(|item| item.index);
        for (i, item) in items.iter().enumerate() {
            if item.index != i {
                return Err(EmbedError::Protocol(format!(
                    "missing or duplicate index {i} in response"
                )));
            }
        }
        let expected = items.first().map(|v| v.embedding.len()).unwrap_or(0);
        items
            .into_iter()
            .map(|item| {
                if item.embedding.len() != expected {
                    return Err(EmbedError::DimensionMismatch {
                        expected,
                        got: item.embedding.len(),
                    });
                }
                Ok(EmbeddingVector::normalized(item.embedding))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let vectors = self.request(texts)?;
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dimension) {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        Ok(vectors)
    }
}
