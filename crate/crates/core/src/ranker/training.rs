//! Training data from the taxonomy itself: leaf lemmas play the role of new
//! words, with their own synsets hidden.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::candidates::generate_candidates;
use super::features::QueryContext;
use super::logistic::Dataset;
use super::wiktionary::WiktionaryTable;
use super::RankerError;
use crate::space::{Mask, SimilaritySpace};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub n_pseudo: usize,
    pub k_assoc: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_pseudo: 1000,
            k_assoc: super::candidates::DEFAULT_ASSOCIATES,
            seed: 0,
        }
    }
}

/// Gold hypernyms of a lemma: ancestors within two hops of any of its
/// synsets.
pub fn gold_of_lemma(taxonomy: &Taxonomy, lemma: &str) -> BTreeSet<String> {
    taxonomy
        .synsets_of(lemma)
        .iter()
        .flat_map(|id| taxonomy.hypernyms(id, 2).unwrap_or_default().into_keys())
        .collect()
}

/// Lemmas whose synsets are all non-root leaves, shuffled by `seed` and cut
/// to `n`.
pub fn pseudo_queries(taxonomy: &Taxonomy, n: usize, seed: u64) -> Vec<String> {
    let mut lemmas: Vec<String> = taxonomy
        .lemmas()
        .filter(|l| {
            taxonomy
                .synsets_of(l)
                .iter()
                .all(|id| taxonomy.is_leaf(id) && !taxonomy.parents(id).is_empty())
        })
        .map(String::from)
        .collect();
    lemmas.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    lemmas.truncate(n);
    lemmas
}

/// A pseudo-query with its feature rows and labels.
type QueryRows = (String, Vec<Vec<f64>>, Vec<f64>);

/// Labelled rows of every usable pseudo-query, plus the queries kept (row
/// groups index into it).
pub fn build_training_set(
    taxonomy: &Taxonomy,
    space: &dyn SimilaritySpace,
    wiktionary: Option<&WiktionaryTable>,
    cfg: &TrainingConfig,
) -> Result<(Dataset, Vec<String>), RankerError> {
    let queries = pseudo_queries(taxonomy, cfg.n_pseudo, cfg.seed);
    if queries.is_empty() {
        return Err(RankerError::InsufficientData("taxonomy has no non-root leaf lemmas".into()));
    }
    let per_query: Vec<Option<QueryRows>> = queries
        .par_iter()
        .map(|q| {
            let mask: Mask = taxonomy.synsets_of(q).iter().cloned().collect();
            let gold = gold_of_lemma(taxonomy, q);
            let vector = space.token_vector(taxonomy, q, &mask)?;
            let cands = generate_candidates(&vector, space, taxonomy, cfg.k_assoc, &mask).ok()?;
            if !cands.iter().any(|c| gold.contains(&c.id)) {
                return None;
            }
            let ctx = QueryContext::new(q, &vector, space, taxonomy, &mask, wiktionary.and_then(|w| w.get(q)));
            let rows = cands.iter().map(|c| ctx.features(c).to_vec()).collect();
            let labels = cands.iter().map(|c| gold.contains(&c.id) as u8 as f64).collect();
            Some((q.clone(), rows, labels))
        })
        .collect();
    let mut data = Dataset::default();
    let mut kept = Vec::new();
    for (q, rows, labels) in per_query.into_iter().flatten() {
        let group = kept.len();
        data.groups.extend(std::iter::repeat_n(group, rows.len()));
        data.rows.extend(rows);
        data.labels.extend(labels);
        kept.push(q);
    }
    if data.is_empty() {
        return Err(RankerError::InsufficientData(
            "no pseudo-query has a gold hypernym among its candidates".into(),
        ));
    }
    Ok((data, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::WordSpace;
    use crate::taxonomy::fixtures::t0;
    use crate::vectors::VectorStore;
    use std::sync::Arc;

    fn space(t: &Taxonomy) -> WordSpace {
        let mut s = VectorStore::new(3);
        for (w, v) in [
            ("organism", [1.0, 0.0, 0.0]),
            ("being", [1.0, 0.1, 0.0]),
            ("animal", [0.7, 0.7, 0.0]),
            ("dog", [0.5, 0.8, 0.1]),
            ("cat", [0.5, 0.8, -0.1]),
            ("plant", [0.7, 0.0, 0.7]),
            ("tree", [0.5, 0.1, 0.8]),
        ] {
            s.insert(w, &v);
        }
        WordSpace::new(Arc::new(s), t)
    }

    #[test]
    fn dog_pseudo_query() {
        let t = t0();
        assert_eq!(
            gold_of_lemma(&t, "dog").into_iter().collect::<Vec<_>>(),
            vec!["s1".to_string(), "s2".to_string()]
        );
        let mut q = pseudo_queries(&t, 10, 0);
        q.sort();
        assert_eq!(q, vec!["cat", "dog", "tree"]);
        let sp = space(&t);
        let cfg = TrainingConfig { k_assoc: 2, ..Default::default() };
        let (data, kept) = build_training_set(&t, &sp, None, &cfg).unwrap();
        assert_eq!(kept.len(), 3);
        assert!(data.labels.iter().all(|&y| y == 0.0 || y == 1.0));
        assert!(data.labels.contains(&1.0));
        assert!(data.rows.iter().all(|r| r.len() == super::super::features::NUM_FEATURES));
    }
}
