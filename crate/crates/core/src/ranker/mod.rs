//! Ranking candidate hypernyms for a query word.
//!
//! Associates are the synsets nearest to the query in some
//! [`SimilaritySpace`]; they and their ancestors within two hops form the
//! candidate pool. Each candidate is described by a fixed feature schema and
//! scored by a logistic-regression [`Ranker`].

pub mod candidates;
pub mod features;
pub mod logistic;
pub mod training;
pub mod wiktionary;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use candidates::{generate_candidates, Candidate, Derivation, DEFAULT_ASSOCIATES};
pub use features::{QueryContext, FEATURE_NAMES, NUM_FEATURES};
pub use logistic::{train_ranker, Dataset, Ranker, RankerConfig};
pub use training::{build_training_set, TrainingConfig};
pub use wiktionary::{WiktionaryRecord, WiktionaryTable};

use crate::space::{Mask, SimilaritySpace};
use crate::taxonomy::Taxonomy;
use crate::vectors::VectorError;

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("no vector for query {0:?}")]
    ZeroQuery(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training data contains a single class")]
    DegenerateData,
    #[error("feature row has {found} values, ranker expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The feature schema as owned names.
pub fn schema() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Sort by score descending, ties by id ascending, and keep `k`.
pub fn order_scores(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Score feature rows (aligned with `ids`) and return the top `k`.
pub fn rank(ranker: &Ranker, ids: &[String], rows: &[Vec<f64>], k: usize) -> Result<Vec<(String, f64)>, RankerError> {
    let scored = ids
        .iter()
        .zip(rows)
        .map(|(id, r)| Ok((id.clone(), ranker.score(r)?)))
        .collect::<Result<Vec<_>, RankerError>>()?;
    Ok(order_scores(scored, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub synset_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Full pipeline for one query: vector lookup, candidates, features, scores.
pub struct Pipeline<'a> {
    pub space: &'a dyn SimilaritySpace,
    pub taxonomy: &'a Taxonomy,
    pub ranker: &'a Ranker,
    pub wiktionary: Option<&'a WiktionaryTable>,
    pub k_assoc: usize,
}

impl Pipeline<'_> {
    pub fn predict(&self, query: &str, k: usize, mask: &Mask) -> Result<Vec<ScoredCandidate>, RankerError> {
        let vector = self
            .space
            .token_vector(self.taxonomy, query, mask)
            .ok_or_else(|| RankerError::ZeroQuery(query.to_string()))?;
        let cands = generate_candidates(&vector, self.space, self.taxonomy, self.k_assoc, mask).map_err(|e| match e {
            RankerError::Vector(VectorError::ZeroQuery) => RankerError::ZeroQuery(query.to_string()),
            other => other,
        })?;
        let ctx = QueryContext::new(
            query,
            &vector,
            self.space,
            self.taxonomy,
            mask,
            self.wiktionary.and_then(|w| w.get(query)),
        );
        let ids: Vec<String> = cands.iter().map(|c| c.id.clone()).collect();
        let rows: Vec<Vec<f64>> = cands.iter().map(|c| ctx.features(c).to_vec()).collect();
        Ok(rank(self.ranker, &ids, &rows, k)?
            .into_iter()
            .enumerate()
            .map(|(i, (synset_id, score))| ScoredCandidate {
                synset_id,
                score,
                rank: i + 1,
            })
            .collect())
    }
}

/// `word TAB rank TAB synset_id TAB score` lines.
pub fn write_predictions<W: Write>(mut out: W, predictions: &[(String, Vec<ScoredCandidate>)]) -> std::io::Result<()> {
    for (word, preds) in predictions {
        for p in preds {
            writeln!(out, "{word}\t{}\t{}\t{}", p.rank, p.synset_id, p.score)?;
        }
    }
    Ok(())
}

/// Predictions per word, ordered by rank.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<String>>, RankerError> {
    let mut by_word: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| RankerError::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad("expected word, rank, synset_id and score"));
        }
        let rank: usize = cols[1].parse().map_err(|_| bad("rank is not a positive integer"))?;
        if rank == 0 {
            return Err(bad("rank is not a positive integer"));
        }
        cols[3].parse::<f64>().map_err(|_| bad("score is not a number"))?;
        by_word.entry(cols[0].to_string()).or_default().push((rank, cols[2].to_string()));
    }
    Ok(by_word
        .into_iter()
        .map(|(w, mut v)| {
            v.sort();
            (w, v.into_iter().map(|(_, id)| id).collect())
        })
        .collect())
}

pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, Vec<String>>, RankerError> {
    read_predictions(BufReader::new(File::open(path)?))
}
