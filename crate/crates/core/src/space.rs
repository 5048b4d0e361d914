//! Similarity spaces the ranker can generate candidates from.
//!
//! A space maps tokens and synsets to vectors and knows how to compare them.
//! Word vectors, graph embeddings and meta-embeddings all implement
//! [`SimilaritySpace`], so the ranking pipeline is written once.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Geometry, GeometryError};
use crate::taxonomy::Taxonomy;
use crate::vectors::{SynsetIndex, VectorError, VectorStore};

/// Synset ids hidden from a lookup (a pseudo-query's own synsets).
pub type Mask = BTreeSet<String>;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("no vector for {0:?}")]
    Miss(String),
    #[error("unknown synset {0}")]
    UnknownSynset(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub trait SimilaritySpace: Send + Sync {
    fn geometry(&self) -> Geometry;

    fn dim(&self) -> usize;

    /// Vector of an arbitrary token (query word or taxonomy lemma). `mask`
    /// lists synsets that must not contribute. `None` is a hard miss.
    fn token_vector(&self, taxonomy: &Taxonomy, token: &str, mask: &Mask) -> Option<Vec<f64>>;

    fn synset_vector(&self, id: &str) -> Option<&[f64]>;

    fn nearest_synsets(
        &self,
        query: &[f64],
        k: usize,
        mask: &Mask,
    ) -> Result<Vec<(String, f64)>, VectorError>;

    /// Compute the row of a synset just attached to `taxonomy`.
    fn insert_synset(&mut self, taxonomy: &Taxonomy, id: &str) -> Result<(), SpaceError>;

    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        self.geometry().similarity(a, b)
    }
}

/// Pretrained word vectors plus averaged synset vectors.
#[derive(Debug, Clone)]
pub struct WordSpace {
    store: Arc<VectorStore>,
    index: SynsetIndex,
}

impl WordSpace {
    pub fn new(store: Arc<VectorStore>, taxonomy: &Taxonomy) -> Self {
        let index = SynsetIndex::from_text(&store, taxonomy);
        WordSpace { store, index }
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn index(&self) -> &SynsetIndex {
        &self.index
    }
}

impl SimilaritySpace for WordSpace {
    fn geometry(&self) -> Geometry {
        Geometry::Euclidean
    }

    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn token_vector(&self, _taxonomy: &Taxonomy, token: &str, _mask: &Mask) -> Option<Vec<f64>> {
        self.store.phrase_vector(token).into_option()
    }

    fn synset_vector(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id)
    }

    fn nearest_synsets(
        &self,
        query: &[f64],
        k: usize,
        mask: &Mask,
    ) -> Result<Vec<(String, f64)>, VectorError> {
        self.index.top_k(query, k, mask)
    }

    fn insert_synset(&mut self, taxonomy: &Taxonomy, id: &str) -> Result<(), SpaceError> {
        let syn = taxonomy
            .synset(id)
            .ok_or_else(|| SpaceError::UnknownSynset(id.to_string()))?;
        self.index.upsert(id, self.store.synset_vector(syn).vector);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::fixtures::t0;

    #[test]
    fn inserted_row_matches_rebuild() {
        let mut store = VectorStore::new(2);
        for (w, v) in [
            ("organism", [1.0, 0.0]),
            ("animal", [0.8, 0.6]),
            ("dog", [0.6, 0.8]),
            ("cat", [0.5, 0.8]),
            ("plant", [0.9, -0.4]),
            ("tree", [0.8, -0.6]),
            ("puppy", [0.55, 0.85]),
        ] {
            store.insert(w, &v);
        }
        let store = Arc::new(store);
        let t = t0();
        let mut space = WordSpace::new(store.clone(), &t);
        let (t2, id) = t.attach("puppy", &["s3".to_string()]).unwrap();
        space.insert_synset(&t2, &id).unwrap();
        let rebuilt = WordSpace::new(store, &t2);
        assert_eq!(space.index(), rebuilt.index());
    }
}
