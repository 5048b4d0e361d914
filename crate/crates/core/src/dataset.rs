//! Diachronic query/gold datasets built by diffing two taxonomy releases.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::taxonomy::{Pos, Taxonomy};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("old taxonomy pos {old} differs from new taxonomy pos {new}")]
    PosMismatch { old: Pos, new: Pos },
    #[error("no query words survive the diff and filters")]
    EmptyDataset,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A new word and the old-version synsets it should be attached under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEntry {
    pub word: String,
    /// Direct and second-order hypernyms, all resolvable in the old taxonomy.
    pub gold_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDataset {
    pub pos: Pos,
    /// Sorted by word.
    pub entries: Vec<QueryEntry>,
    pub old_label: String,
    pub new_label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterConfig {
    /// Drop words shorter than this many characters.
    pub min_length: Option<usize>,
    /// Drop words containing a lemma of one of their gold synsets.
    pub substring_of_hypernym: bool,
    /// Drop multiword expressions.
    pub multiword: bool,
}

/// Explicit old↔new synset id correspondence for releases whose ids drift.
#[derive(Debug, Clone, Default)]
pub struct IdMapping {
    new_to_old: HashMap<String, String>,
}

impl IdMapping {
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        IdMapping {
            new_to_old: pairs.into_iter().map(|(old, new)| (new, old)).collect(),
        }
    }

    /// TSV lines `old_id<TAB>new_id`.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, DatasetError> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(old), Some(new), None) if !old.is_empty() && !new.is_empty() => {
                    pairs.push((old.to_string(), new.to_string()))
                }
                _ => {
                    return Err(DatasetError::Parse {
                        line: i + 1,
                        message: "expected old_id<TAB>new_id".into(),
                    })
                }
            }
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, DatasetError> {
        Self::read_tsv(BufReader::new(File::open(path)?))
    }
}

/// Resolve a new-version id to an old-version id.
fn resolve<'a>(id: &'a str, old: &Taxonomy, mapping: Option<&'a IdMapping>) -> Option<&'a str> {
    match mapping {
        Some(m) => m
            .new_to_old
            .get(id)
            .map(String::as_str)
            .filter(|o| old.contains(o)),
        None => old.contains(id).then_some(id),
    }
}

/// Collect the query words that appear in `new` but not in `old`.
///
/// A word is kept only when every direct hypernym of every one of its new
/// synsets also exists in `old`. Its gold set is those hypernyms plus their
/// own hypernyms (taken from `new`) that resolve in `old`; unresolvable
/// grandparents are omitted. Senses of a polysemous word are merged.
pub fn diff_versions(
    old: &Taxonomy,
    new: &Taxonomy,
    filters: &FilterConfig,
    mapping: Option<&IdMapping>,
) -> Result<QueryDataset, DatasetError> {
    if old.pos() != new.pos() {
        return Err(DatasetError::PosMismatch {
            old: old.pos(),
            new: new.pos(),
        });
    }
    let mut entries = Vec::new();
    'words: for lemma in new.lemmas() {
        if old.contains_lemma(lemma) {
            continue;
        }
        let mut gold = BTreeSet::new();
        for syn in new.synsets_of(lemma) {
            for parent in new.parents(syn) {
                match resolve(parent, old, mapping) {
                    Some(p) => gold.insert(p.to_string()),
                    None => continue 'words,
                };
                for grand in new.parents(parent) {
                    if let Some(g) = resolve(grand, old, mapping) {
                        gold.insert(g.to_string());
                    }
                }
            }
        }
        if !gold.is_empty() {
            entries.push(QueryEntry {
                word: lemma.to_string(),
                gold_ids: gold,
            });
        }
    }
    let entries = apply_filters(entries, filters, old);
    if entries.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(QueryDataset {
        pos: new.pos(),
        entries,
        old_label: String::new(),
        new_label: String::new(),
    })
}

/// Drop entries according to the enabled filters. `taxonomy` resolves the
/// lemmas of gold synsets for the substring filter.
pub fn apply_filters(
    entries: Vec<QueryEntry>,
    filters: &FilterConfig,
    taxonomy: &Taxonomy,
) -> Vec<QueryEntry> {
    entries
        .into_iter()
        .filter(|e| match filters.min_length {
            Some(n) => e.word.chars().count() >= n,
            None => true,
        })
        .filter(|e| !(filters.multiword && e.word.chars().any(char::is_whitespace)))
        .filter(|e| {
            !filters.substring_of_hypernym
                || !e.gold_ids.iter().any(|id| {
                    taxonomy
                        .synset(id)
                        .is_some_and(|s| s.words.iter().any(|w| e.word.contains(w.as_str())))
                })
        })
        .collect()
}

/// `word<TAB>id1,id2,...` per line, entries in the given order.
pub fn write_tsv<W: Write>(entries: &[QueryEntry], mut out: W) -> std::io::Result<()> {
    for e in entries {
        let gold: Vec<&str> = e.gold_ids.iter().map(String::as_str).collect();
        writeln!(out, "{}\t{}", e.word, gold.join(","))?;
    }
    Ok(())
}

pub fn read_tsv<R: BufRead>(reader: R) -> Result<Vec<QueryEntry>, DatasetError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| DatasetError::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        let (word, gold) = line
            .split_once('\t')
            .ok_or_else(|| err("expected word<TAB>gold ids"))?;
        let gold_ids: BTreeSet<String> = gold
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if word.is_empty() || gold_ids.is_empty() {
            return Err(err("empty word or gold set"));
        }
        if seen.insert(word.to_string(), i + 1).is_some() {
            return Err(err("duplicate query word"));
        }
        out.push(QueryEntry {
            word: word.to_string(),
            gold_ids,
        });
    }
    Ok(out)
}

pub fn load_tsv<P: AsRef<Path>>(path: P) -> Result<Vec<QueryEntry>, DatasetError> {
    read_tsv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::fixtures::t0;
    use crate::taxonomy::{synset, Synset};

    fn extend(base: &Taxonomy, extra: Vec<Synset>) -> Taxonomy {
        let mut all: Vec<Synset> = base.synsets().cloned().collect();
        all.extend(extra);
        Taxonomy::from_synsets(all).unwrap()
    }

    fn gold(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn new_word_gets_parent_and_grandparent() {
        let old = t0();
        let new = extend(&old, vec![synset("s7", Pos::Noun, &["puppy"], &["s3"])]);
        let ds = diff_versions(&old, &new, &FilterConfig::default(), None).unwrap();
        assert_eq!(
            ds.entries,
            vec![QueryEntry {
                word: "puppy".into(),
                gold_ids: gold(&["s2", "s3"])
            }]
        );
    }

    #[test]
    fn word_under_unknown_hypernym_is_excluded() {
        let old = t0();
        let new = extend(
            &old,
            vec![
                synset("s7", Pos::Noun, &["puppy"], &["s3"]),
                synset("s9", Pos::Noun, &["gadget"], &["s1"]),
                synset("s8", Pos::Noun, &["widget"], &["s9"]),
            ],
        );
        let ds = diff_versions(&old, &new, &FilterConfig::default(), None).unwrap();
        let words: Vec<&str> = ds.entries.iter().map(|e| e.word.as_str()).collect();
        // gadget hangs under s1 which exists in old, widget under s9 which does not
        assert_eq!(words, vec!["gadget", "puppy"]);
    }

    #[test]
    fn grandparent_missing_from_old_is_omitted() {
        let old = t0();
        // new version re-parents s3 under a new synset s10 → s1
        let mut syns: Vec<Synset> = old.synsets().cloned().collect();
        syns.push(synset("s10", Pos::Noun, &["canid"], &["s1"]));
        syns.iter_mut()
            .find(|s| s.id == "s3")
            .unwrap()
            .hypernym_ids = vec!["s10".into()];
        syns.push(synset("s7", Pos::Noun, &["puppy"], &["s3"]));
        let new = Taxonomy::from_synsets(syns).unwrap();
        let ds = diff_versions(&old, &new, &FilterConfig::default(), None).unwrap();
        let puppy = ds.entries.iter().find(|e| e.word == "puppy").unwrap();
        assert_eq!(puppy.gold_ids, gold(&["s3"]));
    }

    #[test]
    fn polysemous_word_merges_senses() {
        let old = t0();
        let new = extend(
            &old,
            vec![
                synset("s7", Pos::Noun, &["bark"], &["s6"]),
                synset("s8", Pos::Noun, &["bark"], &["s3"]),
            ],
        );
        let ds = diff_versions(&old, &new, &FilterConfig::default(), None).unwrap();
        assert_eq!(ds.entries[0].gold_ids, gold(&["s2", "s3", "s5", "s6"]));
    }

    #[test]
    fn diff_against_itself_is_empty() {
        let t = t0();
        assert!(matches!(
            diff_versions(&t, &t, &FilterConfig::default(), None),
            Err(DatasetError::EmptyDataset)
        ));
    }

    #[test]
    fn mapping_translates_ids() {
        let old = t0();
        // new version uses different ids for the same concepts
        let new = Taxonomy::from_synsets(vec![
            synset("a1", Pos::Noun, &["organism"], &[]),
            synset("a2", Pos::Noun, &["animal"], &["a1"]),
            synset("a3", Pos::Noun, &["dog"], &["a2"]),
            synset("a7", Pos::Noun, &["puppy"], &["a3"]),
        ])
        .unwrap();
        let tsv = "s1\ta1\ns2\ta2\ns3\ta3\n";
        let mapping = IdMapping::read_tsv(tsv.as_bytes()).unwrap();
        let ds = diff_versions(&old, &new, &FilterConfig::default(), Some(&mapping)).unwrap();
        assert_eq!(ds.entries.len(), 1);
        assert_eq!(ds.entries[0].gold_ids, gold(&["s2", "s3"]));
        // without a mapping nothing resolves
        assert!(diff_versions(&old, &new, &FilterConfig::default(), None).is_err());
    }

    #[test]
    fn unrelated_synset_without_new_lemma_changes_nothing() {
        let old = t0();
        let new = extend(&old, vec![synset("s7", Pos::Noun, &["puppy"], &["s3"])]);
        let new2 = extend(&new, vec![synset("s8", Pos::Noun, &["dog"], &["s5"])]);
        let a = diff_versions(&old, &new, &FilterConfig::default(), None).unwrap();
        let b = diff_versions(&old, &new2, &FilterConfig::default(), None).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn pos_mismatch() {
        let verbs = Taxonomy::from_synsets(vec![synset("v1", Pos::Verb, &["run"], &[])]).unwrap();
        assert!(matches!(
            diff_versions(&t0(), &verbs, &FilterConfig::default(), None),
            Err(DatasetError::PosMismatch { .. })
        ));
    }

    #[test]
    fn filters() {
        let t = Taxonomy::from_synsets(vec![
            synset("c1", Pos::Noun, &["cart"], &[]),
            synset("c2", Pos::Noun, &["animal"], &[]),
        ])
        .unwrap();
        let entries = vec![
            QueryEntry { word: "cat".into(), gold_ids: gold(&["c2"]) },
            QueryEntry { word: "puppy".into(), gold_ids: gold(&["c2"]) },
            QueryEntry { word: "dogcart".into(), gold_ids: gold(&["c1"]) },
            QueryEntry { word: "sea lion".into(), gold_ids: gold(&["c2"]) },
        ];
        let off = apply_filters(entries.clone(), &FilterConfig::default(), &t);
        assert_eq!(off, entries);

        let min = FilterConfig { min_length: Some(4), ..Default::default() };
        let kept: Vec<String> = apply_filters(entries.clone(), &min, &t).into_iter().map(|e| e.word).collect();
        assert_eq!(kept, vec!["puppy", "dogcart", "sea lion"]);

        let sub = FilterConfig { substring_of_hypernym: true, ..Default::default() };
        let kept: Vec<String> = apply_filters(entries.clone(), &sub, &t).into_iter().map(|e| e.word).collect();
        assert_eq!(kept, vec!["cat", "puppy", "sea lion"]);

        let mw = FilterConfig { multiword: true, ..Default::default() };
        let kept: Vec<String> = apply_filters(entries, &mw, &t).into_iter().map(|e| e.word).collect();
        assert_eq!(kept, vec!["cat", "puppy", "dogcart"]);
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let entries = vec![QueryEntry { word: "puppy".into(), gold_ids: gold(&["s3", "s2"]) }];
        let mut buf = Vec::new();
        write_tsv(&entries, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "puppy\ts2,s3\n");
        assert_eq!(read_tsv(&buf[..]).unwrap(), entries);
        assert!(read_tsv("puppy\n".as_bytes()).is_err());
        assert!(read_tsv("a\ts1\na\ts2\n".as_bytes()).is_err());
    }
}
