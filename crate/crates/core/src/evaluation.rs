//! Connected-component MAP, precision@k and bootstrap deviations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::QueryEntry;
use crate::taxonomy::{Taxonomy, TaxonomyError};

pub const BOOTSTRAP_FRACTION: f64 = 0.8;
pub const BOOTSTRAP_REPS: usize = 30;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction {0} appears twice")]
    DuplicatePrediction(String),
    #[error("gold set is empty")]
    EmptyGold,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// AP where each connected component of the gold set can be credited once.
///
/// Only the first `k` predictions count. A prediction landing in an already
/// credited component is a miss but still occupies its rank.
pub fn average_precision_components(
    preds: &[String],
    gold: &BTreeSet<String>,
    taxonomy: &Taxonomy,
    k: usize,
) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut seen = BTreeSet::new();
    for p in preds {
        if !seen.insert(p) {
            return Err(EvalError::DuplicatePrediction(p.clone()));
        }
    }
    let components = taxonomy.connected_components(gold.iter().map(String::as_str))?;
    let component_of: BTreeMap<&str, usize> = components
        .iter()
        .enumerate()
        .flat_map(|(c, ids)| ids.iter().map(move |id| (id.as_str(), c)))
        .collect();
    let mut credited = vec![false; components.len()];
    let mut hits = 0usize;
    let mut total = 0.0;
    for (j, p) in preds.iter().take(k).enumerate() {
        if let Some(&c) = component_of.get(p.as_str()) {
            if !credited[c] {
                credited[c] = true;
                hits += 1;
                total += hits as f64 / (j + 1) as f64;
            }
        }
    }
    Ok(total / components.len() as f64)
}

/// Share of the first `k` predictions that are gold.
pub fn precision_at_k(preds: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    assert!(k >= 1, "precision@k needs k ≥ 1");
    let correct = preds.iter().take(k).filter(|p| gold.contains(*p)).count();
    correct as f64 / k as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population std of the means of `reps` subsamples (without replacement)
/// of ⌈fraction·N⌉ values each.
pub fn bootstrap_std(values: &[f64], fraction: f64, reps: usize, seed: u64) -> Result<f64, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::InsufficientData("bootstrap needs at least two queries".into()));
    }
    let n = values.len();
    let size = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..reps)
        .map(|_| {
            let idx = sample(&mut rng, n, size);
            idx.iter().map(|i| values[i]).sum::<f64>() / size as f64
        })
        .collect();
    let m = mean(&means);
    Ok((means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / reps as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryScore {
    pub word: String,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub map: f64,
    pub map_std: f64,
    pub precision: BTreeMap<String, f64>,
    pub n_queries: usize,
    #[serde(skip)]
    pub per_query: Vec<QueryScore>,
}

impl EvalReport {
    /// `word TAB ap` per query.
    pub fn per_query_tsv(&self) -> String {
        self.per_query
            .iter()
            .map(|q| format!("{}\t{}\n", q.word, q.ap))
            .collect()
    }
}

/// Score predictions against a query dataset. Gold ids must exist in
/// `taxonomy` (the older release); words without predictions score 0.
pub fn evaluate(
    predictions: &BTreeMap<String, Vec<String>>,
    gold: &[QueryEntry],
    taxonomy: &Taxonomy,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::InsufficientData("no gold queries".into()));
    }
    let empty = Vec::new();
    let mut per_query = Vec::with_capacity(gold.len());
    let mut precision: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in gold {
        let preds = predictions.get(&e.word).unwrap_or(&empty);
        let top: Vec<String> = preds.iter().take(k).cloned().collect();
        let ap = average_precision_components(&top, &e.gold_ids, taxonomy, k)?;
        per_query.push(QueryScore {
            word: e.word.clone(),
            ap,
        });
        for p in 1..=3 {
            precision
                .entry(p.to_string())
                .or_default()
                .push(precision_at_k(&top, &e.gold_ids, p));
        }
    }
    let aps: Vec<f64> = per_query.iter().map(|q| q.ap).collect();
    let map_std = if aps.len() >= 2 {
        bootstrap_std(&aps, BOOTSTRAP_FRACTION, BOOTSTRAP_REPS, seed)?
    } else {
        0.0
    };
    Ok(EvalReport {
        map: mean(&aps),
        map_std,
        precision: precision.into_iter().map(|(k, v)| (k, mean(&v))).collect(),
        n_queries: aps.len(),
        per_query,
    })
}
