//! Candidate hypernyms: nearest synsets of the query and their ancestors
//! up to two hops.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::RankerError;
use crate::space::{Mask, SimilaritySpace};
use crate::taxonomy::Taxonomy;

pub const DEFAULT_ASSOCIATES: usize = 10;

/// How a candidate entered the pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derivation {
    pub associate: String,
    /// 0 for the associate itself, 1 for its parents, 2 for grandparents.
    pub level: u8,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub id: String,
    pub provenance: Vec<Derivation>,
}

impl Candidate {
    /// Occurrences in the merged list.
    pub fn n(&self) -> usize {
        self.provenance.len()
    }
}

/// Parents and grandparents of `id` as two sets; a synset reachable by both
/// one and two hops is in both.
pub fn ancestor_levels(taxonomy: &Taxonomy, id: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let level1: BTreeSet<String> = taxonomy.parents(id).iter().cloned().collect();
    let level2 = level1
        .iter()
        .flat_map(|p| taxonomy.parents(p).iter().cloned())
        .collect();
    (level1, level2)
}

/// Merge the derivations of `associates` into one candidate per synset,
/// sorted by id. Masked synsets never become candidates.
pub fn merge_candidates(taxonomy: &Taxonomy, associates: &[(String, f64)], mask: &Mask) -> Vec<Candidate> {
    let mut pool: BTreeMap<String, Vec<Derivation>> = BTreeMap::new();
    let mut add = |id: &str, assoc: &str, level: u8, similarity: f64| {
        if mask.contains(id) {
            return;
        }
        pool.entry(id.to_string()).or_default().push(Derivation {
            associate: assoc.to_string(),
            level,
            similarity,
        });
    };
    for (assoc, sim) in associates {
        add(assoc, assoc, 0, *sim);
        let (l1, l2) = ancestor_levels(taxonomy, assoc);
        for p in &l1 {
            add(p, assoc, 1, *sim);
        }
        for g in &l2 {
            add(g, assoc, 2, *sim);
        }
    }
    pool.into_iter()
        .map(|(id, provenance)| Candidate { id, provenance })
        .collect()
}

/// Retrieve `k_assoc` associates for `query` in `space` and expand them.
pub fn generate_candidates(
    query: &[f64],
    space: &dyn SimilaritySpace,
    taxonomy: &Taxonomy,
    k_assoc: usize,
    mask: &Mask,
) -> Result<Vec<Candidate>, RankerError> {
    let associates = space.nearest_synsets(query, k_assoc, mask)?;
    Ok(merge_candidates(taxonomy, &associates, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::fixtures::t0;

    fn assoc(ids: &[&str]) -> Vec<(String, f64)> {
        ids.iter().map(|i| (i.to_string(), 0.5)).collect()
    }

    fn summary(c: &[Candidate]) -> Vec<(&str, usize)> {
        c.iter().map(|c| (c.id.as_str(), c.n())).collect()
    }

    #[test]
    fn siblings_share_parent() {
        let c = merge_candidates(&t0(), &assoc(&["s3", "s4"]), &Mask::new());
        assert_eq!(summary(&c), vec![("s1", 2), ("s2", 2), ("s3", 1), ("s4", 1)]);
        let s2 = &c[1];
        assert!(s2.provenance.iter().all(|d| d.level == 1));
    }

    #[test]
    fn root_contributes_itself() {
        let c = merge_candidates(&t0(), &assoc(&["s1"]), &Mask::new());
        assert_eq!(summary(&c), vec![("s1", 1)]);
        assert_eq!(c[0].provenance[0].level, 0);
    }

    #[test]
    fn chain_walk() {
        let c = merge_candidates(&t0(), &assoc(&["s6"]), &Mask::new());
        assert_eq!(summary(&c), vec![("s1", 1), ("s5", 1), ("s6", 1)]);
    }

    #[test]
    fn masked_synsets_are_not_candidates() {
        let mask: Mask = ["s2".to_string()].into_iter().collect();
        let c = merge_candidates(&t0(), &assoc(&["s3"]), &mask);
        assert_eq!(summary(&c), vec![("s1", 1), ("s3", 1)]);
    }
}
