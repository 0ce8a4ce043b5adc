//! Shared data generators for the criterion benches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use kgrag_core::embed::EmbeddingVector;
use kgrag_core::index::{build_index, ChunkKind, DocumentChunk, VectorIndex};
use kgrag_core::HashEmbedder;

/// Random unit vector with a seeded generator.
pub fn random_unit_vector(rng: &mut ChaCha8Rng, dimension: usize) -> EmbeddingVector {
    let values: Vec<f32> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
    EmbeddingVector::normalized(values)
}

/// Flat index over `count` synthetic chunks embedded with the hash embedder.
pub fn synthetic_index(count: usize, dimension: usize) -> VectorIndex {
    let provider = HashEmbedder::new(dimension);
    let chunks: Vec<DocumentChunk> = (0..count)
        .map(|i| DocumentChunk {
            chunk_id: format!("c{i}"),
            text: format!("synthetic chunk number {i} about topic {}", i % 17),
            kind: ChunkKind::Raw,
            provenance: "bench".into(),
        })
        .collect();
    build_index(chunks, &provider).expect("bench index builds")
}
