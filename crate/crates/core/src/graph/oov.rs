//! Placing words that are not in the taxonomy into a graph space.

use std::sync::Arc;

use super::{GcnModel, NodeEmbeddings};
use crate::geometry::Geometry;
use crate::space::{Mask, SimilaritySpace, SpaceError};
use crate::taxonomy::Taxonomy;
use crate::vectors::{SynsetIndex, VectorError, VectorStore};

/// Neighbours whose graph vectors are aggregated for an unseen word.
pub const OOV_NEIGHBORS: usize = 5;

/// Graph-space vector for a word given its text vector `x`.
///
/// With a GCN model the word is pushed through the encoder as an isolated
/// node. Otherwise the graph vectors of the `OOV_NEIGHBORS` text-nearest
/// synsets are averaged (Einstein midpoint in the ball).
pub fn project_text_vector(
    x: &[f64],
    text: &SynsetIndex,
    emb: &NodeEmbeddings,
    gcn: Option<&GcnModel>,
    mask: &Mask,
) -> Result<Vec<f64>, SpaceError> {
    if let Some(model) = gcn {
        if crate::geometry::norm(x) == 0.0 {
            return Err(VectorError::ZeroQuery.into());
        }
        return Ok(model.embed_isolated(x));
    }
    let near = text.top_k(x, OOV_NEIGHBORS, mask)?;
    let points: Vec<&[f64]> = near.iter().filter_map(|(id, _)| emb.get(id)).collect();
    if points.is_empty() {
        return Err(SpaceError::Miss("no embedded neighbours".into()));
    }
    Ok(emb.geometry().aggregate(&points)?)
}

/// Project a query word; a word with no text vector is a `ZeroQuery`.
pub fn project_oov(
    query: &str,
    store: &VectorStore,
    text: &SynsetIndex,
    emb: &NodeEmbeddings,
    gcn: Option<&GcnModel>,
    mask: &Mask,
) -> Result<Vec<f64>, SpaceError> {
    let x = store
        .phrase_vector(query)
        .into_option()
        .ok_or(VectorError::ZeroQuery)?;
    project_text_vector(&x, text, emb, gcn, mask)
}

/// A graph embedding space usable by the ranker.
#[derive(Debug, Clone)]
pub struct GraphSpace {
    store: Arc<VectorStore>,
    text: SynsetIndex,
    emb: NodeEmbeddings,
    gcn: Option<GcnModel>,
}

impl GraphSpace {
    pub fn new(store: Arc<VectorStore>, taxonomy: &Taxonomy, emb: NodeEmbeddings, gcn: Option<GcnModel>) -> Self {
        let text = SynsetIndex::from_text(&store, taxonomy);
        GraphSpace { store, text, emb, gcn }
    }

    pub fn embeddings(&self) -> &NodeEmbeddings {
        &self.emb
    }
}

impl SimilaritySpace for GraphSpace {
    fn geometry(&self) -> Geometry {
        self.emb.geometry()
    }

    fn dim(&self) -> usize {
        self.emb.dim()
    }

    /// Taxonomy lemmas aggregate the vectors of their unmasked synsets; any
    /// other token is projected from its text vector.
    fn token_vector(&self, taxonomy: &Taxonomy, token: &str, mask: &Mask) -> Option<Vec<f64>> {
        let own: Vec<&[f64]> = taxonomy
            .synsets_of(token)
            .iter()
            .filter(|id| !mask.contains(*id))
            .filter_map(|id| self.emb.get(id))
            .collect();
        if !own.is_empty() {
            return self.geometry().aggregate(&own).ok();
        }
        project_oov(token, &self.store, &self.text, &self.emb, self.gcn.as_ref(), mask).ok()
    }

    fn synset_vector(&self, id: &str) -> Option<&[f64]> {
        self.emb.get(id)
    }

    fn nearest_synsets(&self, query: &[f64], k: usize, mask: &Mask) -> Result<Vec<(String, f64)>, VectorError> {
        self.emb.index().top_k(query, k, mask)
    }

    /// The new synset is projected from its text vector; when that fails
    /// (no text vector) it takes the aggregate of its parents' vectors.
    fn insert_synset(&mut self, taxonomy: &Taxonomy, id: &str) -> Result<(), SpaceError> {
        let syn = taxonomy
            .synset(id)
            .ok_or_else(|| SpaceError::UnknownSynset(id.to_string()))?;
        let x = self.store.synset_vector(syn).vector;
        self.text.upsert(id, x.clone());
        let mask: Mask = [id.to_string()].into_iter().collect();
        let v = match project_text_vector(&x, &self.text, &self.emb, self.gcn.as_ref(), &mask) {
            Ok(v) => v,
            Err(_) => {
                let parents: Vec<&[f64]> = syn.hypernym_ids.iter().filter_map(|p| self.emb.get(p)).collect();
                if parents.is_empty() {
                    return Err(SpaceError::Miss(id.to_string()));
                }
                self.geometry().aggregate(&parents)?
            }
        };
        self.emb.upsert(id, v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Method;
    use crate::taxonomy::fixtures::t0;

    fn store() -> Arc<VectorStore> {
        let mut s = VectorStore::new(2);
        for (w, v) in [
            ("organism", [1.0, 0.0]),
            ("being", [1.0, 0.1]),
            ("animal", [0.8, 0.6]),
            ("dog", [0.6, 0.8]),
            ("cat", [0.5, 0.8]),
            ("plant", [0.9, -0.4]),
            ("tree", [0.8, -0.6]),
            ("puppy", [0.6, 0.8]),
        ] {
            s.insert(w, &v);
        }
        Arc::new(s)
    }

    fn emb(geometry: Geometry, f: impl Fn(usize) -> Vec<f64>) -> NodeEmbeddings {
        let t = t0();
        let rows = t.ids().enumerate().map(|(i, id)| (id.to_string(), f(i))).collect();
        NodeEmbeddings::new(Method::Hope, SynsetIndex::from_rows(geometry, 2, rows)).unwrap()
    }

    #[test]
    fn identical_neighbours_give_that_point() {
        let t = t0();
        let s = store();
        let text = SynsetIndex::from_text(&s, &t);
        for g in [Geometry::Euclidean, Geometry::Poincare] {
            let e = emb(g, |_| vec![0.3, -0.2]);
            let v = project_oov("puppy", &s, &text, &e, None, &Mask::new()).unwrap();
            assert!((v[0] - 0.3).abs() < 1e-12 && (v[1] + 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_projection_is_mean_of_top_five() {
        let t = t0();
        let s = store();
        let text = SynsetIndex::from_text(&s, &t);
        let e = emb(Geometry::Euclidean, |i| vec![i as f64, (i * i) as f64]);
        let mask = Mask::new();
        let v = project_oov("puppy", &s, &text, &e, None, &mask).unwrap();
        let q = s.phrase_vector("puppy").vector;
        let near = text.top_k(&q, 5, &mask).unwrap();
        let mut sum = [0.0, 0.0];
        for (id, _) in &near {
            let r = e.get(id).unwrap();
            sum[0] += r[0];
            sum[1] += r[1];
        }
        assert!((v[0] - sum[0] / 5.0).abs() < 1e-12);
        assert!((v[1] - sum[1] / 5.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_word_is_a_zero_query() {
        let t = t0();
        let s = store();
        let text = SynsetIndex::from_text(&s, &t);
        let e = emb(Geometry::Euclidean, |_| vec![1.0, 0.0]);
        let err = project_oov("zzz", &s, &text, &e, None, &Mask::new()).unwrap_err();
        assert!(matches!(err, SpaceError::Vector(VectorError::ZeroQuery)));
    }

    #[test]
    fn lemma_uses_own_synsets_unless_masked() {
        let t = t0();
        let e = emb(Geometry::Euclidean, |i| vec![i as f64 + 1.0, 0.5]);
        let space = GraphSpace::new(store(), &t, e.clone(), None);
        let own = space.token_vector(&t, "dog", &Mask::new()).unwrap();
        assert_eq!(own, e.get("s3").unwrap());
        let mask: Mask = ["s3".to_string()].into_iter().collect();
        let projected = space.token_vector(&t, "dog", &mask).unwrap();
        assert_ne!(projected, own);
    }

    #[test]
    fn inserted_synset_gets_a_vector() {
        let t = t0();
        let e = emb(Geometry::Poincare, |i| vec![0.1 * i as f64, 0.05]);
        let mut space = GraphSpace::new(store(), &t, e, None);
        let (t2, id) = t.attach("puppy", &["s3".to_string()]).unwrap();
        space.insert_synset(&t2, &id).unwrap();
        let v = space.synset_vector(&id).unwrap();
        assert!(crate::geometry::dot(v, v) < 1.0);
    }
}
