//! The 22-feature schema describing a (query, candidate) pair.

use std::collections::HashMap;
use std::sync::Mutex;

use super::candidates::Candidate;
use super::wiktionary::WiktionaryRecord;
use crate::geometry;
use crate::space::{Mask, SimilaritySpace};
use crate::taxonomy::Taxonomy;

pub const FEATURE_NAMES: [&str; 22] = [
    "n_times_sim",
    "wikt_hypernym",
    "wikt_synonym",
    "wikt_definition",
    "wikt_hypernym_cos",
    "n",
    "log2_2_plus_n",
    "level_min",
    "level_mean",
    "level_max",
    "lemma_cos_min",
    "lemma_cos_mean",
    "lemma_cos_max",
    "hypo_min_min",
    "hypo_min_mean",
    "hypo_min_max",
    "hypo_mean_min",
    "hypo_mean_mean",
    "hypo_mean_max",
    "hypo_max_min",
    "hypo_max_mean",
    "hypo_max_max",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// Cosine that treats a zero vector as orthogonal to everything.
fn cos(a: &[f64], b: &[f64]) -> f64 {
    let c = geometry::cosine(a, b);
    if c.is_finite() {
        c
    } else {
        0.0
    }
}

/// Min, mean and max; zeros for an empty list.
pub fn min_mean_max(xs: &[f64]) -> [f64; 3] {
    if xs.is_empty() {
        return [0.0; 3];
    }
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [min, xs.iter().sum::<f64>() / xs.len() as f64, max]
}

/// Everything shared by the candidates of one query. Lemma vectors are
/// cached because hyponym blocks revisit the same synsets.
pub struct QueryContext<'a> {
    pub query: &'a str,
    pub vector: &'a [f64],
    pub space: &'a dyn SimilaritySpace,
    pub taxonomy: &'a Taxonomy,
    pub mask: &'a Mask,
    pub wiktionary: Option<&'a WiktionaryRecord>,
    lemma_cache: Mutex<HashMap<String, Option<Vec<f64>>>>,
}

impl<'a> QueryContext<'a> {
    pub fn new(
        query: &'a str,
        vector: &'a [f64],
        space: &'a dyn SimilaritySpace,
        taxonomy: &'a Taxonomy,
        mask: &'a Mask,
        wiktionary: Option<&'a WiktionaryRecord>,
    ) -> Self {
        QueryContext {
            query,
            vector,
            space,
            taxonomy,
            mask,
            wiktionary,
            lemma_cache: Mutex::new(HashMap::new()),
        }
    }

    fn lemma_vector(&self, lemma: &str) -> Option<Vec<f64>> {
        if let Some(v) = self.lemma_cache.lock().expect("cache lock").get(lemma) {
            return v.clone();
        }
        let v = self.space.token_vector(self.taxonomy, lemma, self.mask);
        self.lemma_cache
            .lock()
            .expect("cache lock")
            .insert(lemma.to_string(), v.clone());
        v
    }

    /// Cosines between the query and each resolvable lemma of `id`.
    fn lemma_cosines(&self, id: &str) -> Vec<f64> {
        let Some(syn) = self.taxonomy.synset(id) else {
            return Vec::new();
        };
        syn.words
            .iter()
            .filter_map(|w| self.lemma_vector(w))
            .map(|v| cos(self.vector, &v))
            .collect()
    }

    pub fn features(&self, cand: &Candidate) -> [f64; NUM_FEATURES] {
        let mut f = [0.0; NUM_FEATURES];
        let n = cand.n() as f64;
        let cvec = self.space.synset_vector(&cand.id);
        let sim = cvec.map(|v| self.space.similarity(self.vector, v)).unwrap_or(0.0);
        f[0] = if sim.is_finite() { n * sim } else { 0.0 };

        let lemmas: &[String] = self
            .taxonomy
            .synset(&cand.id)
            .map(|s| s.words.as_slice())
            .unwrap_or(&[]);
        if let Some(w) = self.wiktionary {
            f[1] = lemmas.iter().any(|l| w.hypernyms.contains(l)) as u8 as f64;
            f[2] = lemmas.iter().any(|l| w.synonyms.contains(l)) as u8 as f64;
            f[3] = lemmas.iter().any(|l| w.defines_with(l)) as u8 as f64;
            if let Some(cv) = cvec {
                let cosines: Vec<f64> = w
                    .hypernyms
                    .iter()
                    .filter_map(|h| self.lemma_vector(h))
                    .map(|hv| cos(cv, &hv))
                    .collect();
                f[4] = min_mean_max(&cosines)[1];
            }
        }

        f[5] = n;
        f[6] = (2.0 + n).log2();
        let levels: Vec<f64> = cand.provenance.iter().map(|d| d.level as f64).collect();
        f[7..10].copy_from_slice(&min_mean_max(&levels));
        f[10..13].copy_from_slice(&min_mean_max(&self.lemma_cosines(&cand.id)));

        let per_hyponym: Vec<[f64; 3]> = self
            .taxonomy
            .children(&cand.id)
            .iter()
            .filter(|h| !self.mask.contains(*h))
            .map(|h| self.lemma_cosines(h))
            .filter(|c| !c.is_empty())
            .map(|c| min_mean_max(&c))
            .collect();
        for stat in 0..3 {
            let column: Vec<f64> = per_hyponym.iter().map(|s| s[stat]).collect();
            let at = 13 + stat * 3;
            f[at..at + 3].copy_from_slice(&min_mean_max(&column));
        }
        f
    }
}
