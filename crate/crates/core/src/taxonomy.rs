//! In-memory hypernymy taxonomy.
//!
//! A [`Taxonomy`] is a DAG of [`Synset`]s whose edges point from a child to
//! its hypernyms. It is immutable once loaded; [`Taxonomy::attach`] returns a
//! new value with one extra leaf synset.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prefix of synset ids minted by [`Taxonomy::attach`].
pub const NEW_SYNSET_PREFIX: &str = "new-";

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("hypernym cycle through synset {0}")]
    Cycle(String),
    #[error("synset {synset} lists unknown hypernym {hypernym}")]
    DanglingEdge { synset: String, hypernym: String },
    #[error("unknown synset {0}")]
    UnknownSynset(String),
    #[error("duplicate synset id {0}")]
    DuplicateId(String),
    #[error("synset {id} has pos {found}, taxonomy pos is {expected}")]
    PosMismatch { id: String, expected: Pos, found: Pos },
    #[error("synset {0} has no lemmas")]
    EmptyWords(String),
    #[error("taxonomy has no root synset")]
    NoRoot,
    #[error("empty lemma")]
    EmptyLemma,
    #[error("attach needs at least one hypernym")]
    NoHypernyms,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Part of speech of a synset. Only nouns and verbs carry hypernymy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "n")]
    Noun,
    #[serde(rename = "v")]
    Verb,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::Noun => "n",
            Pos::Verb => "v",
        })
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" | "noun" => Ok(Pos::Noun),
            "v" | "verb" => Ok(Pos::Verb),
            other => Err(format!("unknown part of speech {other:?}")),
        }
    }
}

/// One concept: a set of synonymous lemmas plus its hypernym links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    pub pos: Pos,
    pub words: Vec<String>,
    #[serde(rename = "hypernyms")]
    pub hypernym_ids: Vec<String>,
}

/// Lowercase and collapse internal whitespace runs to a single space.
pub fn normalize_lemma(raw: &str) -> String {
    raw.split_whitespace()
        .map(|part| part.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pos: Pos,
    synsets: BTreeMap<String, Synset>,
    lemma_index: BTreeMap<String, Vec<String>>,
    hyponym_index: BTreeMap<String, Vec<String>>,
}

impl Taxonomy {
    /// Validate and index a set of synsets.
    ///
    /// Lemmas are normalized and deduplicated within a synset. The result
    /// is guaranteed acyclic, free of dangling edges and rooted.
    pub fn from_synsets<I>(synsets: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = Synset>,
    {
        let mut map = BTreeMap::new();
        let mut pos = None;
        for mut syn in synsets {
            let mut seen = BTreeSet::new();
            syn.words = syn
                .words
                .iter()
                .map(|w| normalize_lemma(w))
                .filter(|w| !w.is_empty() && seen.insert(w.clone()))
                .collect();
            if syn.words.is_empty() {
                return Err(TaxonomyError::EmptyWords(syn.id));
            }
            let mut seen = BTreeSet::new();
            syn.hypernym_ids.retain(|h| seen.insert(h.clone()));
            match pos {
                None => pos = Some(syn.pos),
                Some(p) if p != syn.pos => {
                    return Err(TaxonomyError::PosMismatch {
                        id: syn.id,
                        expected: p,
                        found: syn.pos,
                    })
                }
                Some(_) => {}
            }
            if map.contains_key(&syn.id) {
                return Err(TaxonomyError::DuplicateId(syn.id));
            }
            map.insert(syn.id.clone(), syn);
        }
        let pos = pos.ok_or(TaxonomyError::NoRoot)?;
        for syn in map.values() {
            for h in &syn.hypernym_ids {
                if !map.contains_key(h) {
                    return Err(TaxonomyError::DanglingEdge {
                        synset: syn.id.clone(),
                        hypernym: h.clone(),
                    });
                }
            }
        }
        if !map.values().any(|s| s.hypernym_ids.is_empty()) {
            // every node has a parent, so there must be a cycle somewhere
            let t = Self::index(pos, map);
            return Err(match t.find_cycle() {
                Some(id) => TaxonomyError::Cycle(id),
                None => TaxonomyError::NoRoot,
            });
        }
        let t = Self::index(pos, map);
        if let Some(id) = t.find_cycle() {
            return Err(TaxonomyError::Cycle(id));
        }
        Ok(t)
    }

    fn index(pos: Pos, synsets: BTreeMap<String, Synset>) -> Self {
        let mut lemma_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut hyponym_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        // BTreeMap iteration is id-sorted, so every pushed list stays sorted.
        for syn in synsets.values() {
            for w in &syn.words {
                lemma_index.entry(w.clone()).or_default().push(syn.id.clone());
            }
            for h in &syn.hypernym_ids {
                hyponym_index.entry(h.clone()).or_default().push(syn.id.clone());
            }
        }
        Taxonomy {
            pos,
            synsets,
            lemma_index,
            hyponym_index,
        }
    }

    /// Returns one synset on a cycle, if any (Kahn's algorithm leftovers).
    fn find_cycle(&self) -> Option<String> {
        let order = self.kahn();
        if order.len() == self.synsets.len() {
            return None;
        }
        let done: BTreeSet<&str> = order.iter().map(String::as_str).collect();
        // Walk parents from any leftover node until a node repeats.
        let start = self.synsets.keys().find(|id| !done.contains(id.as_str()))?;
        let mut seen = BTreeSet::new();
        let mut cur = start.as_str();
        loop {
            if !seen.insert(cur) {
                return Some(cur.to_string());
            }
            let syn = &self.synsets[cur];
            cur = syn
                .hypernym_ids
                .iter()
                .map(String::as_str)
                .find(|h| !done.contains(h))?;
        }
    }

    /// Kahn topological sort from roots downward; ties by id.
    fn kahn(&self) -> Vec<String> {
        let mut indeg: BTreeMap<&str, usize> = self
            .synsets
            .values()
            .map(|s| (s.id.as_str(), s.hypernym_ids.len()))
            .collect();
        let mut queue: VecDeque<&str> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.synsets.len());
        while let Some(id) = queue.pop_front() {
            order.push(id.to_string());
            for child in self.hyponym_index.get(id).into_iter().flatten() {
                let d = indeg.get_mut(child.as_str()).expect("indexed child");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(child);
                }
            }
        }
        order
    }

    /// Synset ids ordered so that every hypernym precedes its hyponyms.
    pub fn topological_order(&self) -> Vec<String> {
        self.kahn()
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.synsets.values().map(|s| s.hypernym_ids.len()).sum()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.synsets.contains_key(id)
    }

    pub fn synset(&self, id: &str) -> Option<&Synset> {
        self.synsets.get(id)
    }

    fn require(&self, id: &str) -> Result<&Synset, TaxonomyError> {
        self.synsets
            .get(id)
            .ok_or_else(|| TaxonomyError::UnknownSynset(id.to_string()))
    }

    /// Synsets in id order.
    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    /// Sorted synset ids.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.synsets.keys().map(String::as_str)
    }

    /// Every (child, parent) pair, ordered by child then parent position.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.synsets.values().flat_map(|s| {
            s.hypernym_ids
                .iter()
                .map(move |h| (s.id.as_str(), h.as_str()))
        })
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.lemma_index.keys().map(String::as_str)
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.lemma_index.contains_key(lemma)
    }

    /// Sorted ids of the synsets containing `lemma`.
    pub fn synsets_of(&self, lemma: &str) -> &[String] {
        self.lemma_index.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ancestors of `id` up to `max_order` hops, each at its minimum order.
    pub fn hypernyms(
        &self,
        id: &str,
        max_order: usize,
    ) -> Result<BTreeMap<String, usize>, TaxonomyError> {
        self.require(id)?;
        let mut out = BTreeMap::new();
        let mut frontier = vec![id];
        for order in 1..=max_order {
            let mut next = Vec::new();
            for cur in frontier {
                for h in &self.synsets[cur].hypernym_ids {
                    if h != id && !out.contains_key(h) {
                        out.insert(h.clone(), order);
                        next.push(h.as_str());
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(out)
    }

    /// Direct hypernyms of `id` (without validating the id).
    pub fn parents(&self, id: &str) -> &[String] {
        self.synsets
            .get(id)
            .map(|s| s.hypernym_ids.as_slice())
            .unwrap_or(&[])
    }

    /// Sorted ids of the synsets listing `id` as a hypernym.
    pub fn hyponyms(&self, id: &str) -> Result<&[String], TaxonomyError> {
        self.require(id)?;
        Ok(self.children(id))
    }

    pub(crate) fn children(&self, id: &str) -> &[String] {
        self.hyponym_index
            .get(id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.children(id).is_empty()
    }

    /// Connected components of the subgraph induced on `ids`, with edges
    /// taken as undirected. Components are sorted by their smallest id.
    pub fn connected_components<'a, I>(&self, ids: I) -> Result<Vec<BTreeSet<String>>, TaxonomyError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let members: BTreeSet<&str> = ids.into_iter().collect();
        for id in &members {
            self.require(id)?;
        }
        let mut assigned: BTreeSet<&str> = BTreeSet::new();
        let mut out = Vec::new();
        for &start in &members {
            if assigned.contains(start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            assigned.insert(start);
            while let Some(cur) = stack.pop() {
                comp.insert(cur.to_string());
                let ups = self.synsets[cur].hypernym_ids.iter();
                let downs = self.children(cur).iter();
                for nb in ups.chain(downs) {
                    let nb = nb.as_str();
                    if members.contains(nb) && assigned.insert(nb) {
                        stack.push(nb);
                    }
                }
            }
            out.push(comp);
        }
        Ok(out)
    }

    /// Id the next [`attach`](Self::attach) call will mint.
    pub fn next_new_id(&self) -> String {
        let max = self
            .synsets
            .keys()
            .filter_map(|id| id.strip_prefix(NEW_SYNSET_PREFIX)?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        format!("{NEW_SYNSET_PREFIX}{}", max + 1)
    }

    /// Add a single-lemma leaf synset under `hypernym_ids`.
    ///
    /// Returns the new taxonomy and the minted id. Existing synsets are not
    /// touched; parents are attached exactly as given (duplicates dropped).
    pub fn attach(
        &self,
        lemma: &str,
        hypernym_ids: &[String],
    ) -> Result<(Taxonomy, String), TaxonomyError> {
        let lemma = normalize_lemma(lemma);
        if lemma.is_empty() {
            return Err(TaxonomyError::EmptyLemma);
        }
        if hypernym_ids.is_empty() {
            return Err(TaxonomyError::NoHypernyms);
        }
        for h in hypernym_ids {
            self.require(h)?;
        }
        let id = self.next_new_id();
        let mut parents: Vec<String> = Vec::new();
        for h in hypernym_ids {
            if !parents.contains(h) {
                parents.push(h.clone());
            }
        }
        let syn = Synset {
            id: id.clone(),
            pos: self.pos,
            words: vec![lemma.clone()],
            hypernym_ids: parents.clone(),
        };
        let mut next = self.clone();
        let owners = next.lemma_index.entry(lemma).or_default();
        owners.push(id.clone());
        owners.sort();
        for h in &parents {
            let kids = next.hyponym_index.entry(h.clone()).or_default();
            kids.push(id.clone());
            kids.sort();
        }
        next.synsets.insert(id.clone(), syn);
        Ok((next, id))
    }

    /// Parse the JSON-Lines synset format. Blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, TaxonomyError> {
        let mut synsets = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let syn: Synset = serde_json::from_str(&line).map_err(|e| TaxonomyError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            synsets.push(syn);
        }
        Self::from_synsets(synsets)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, TaxonomyError> {
        let file = File::open(path)?;
        Self::read_jsonl(BufReader::new(file))
    }

    /// Write one JSON object per synset, sorted by id.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TaxonomyError> {
        for syn in self.synsets.values() {
            serde_json::to_writer(&mut out, syn).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), TaxonomyError> {
        let mut file = std::io::BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut file)?;
        file.flush()?;
        Ok(())
    }
}

/// Shorthand used by tests and fixtures.
pub fn synset(id: &str, pos: Pos, words: &[&str], hypernyms: &[&str]) -> Synset {
    Synset {
        id: id.to_string(),
        pos,
        words: words.iter().map(|w| w.to_string()).collect(),
        hypernym_ids: hypernyms.iter().map(|h| h.to_string()).collect(),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// s2→s1, s3→s2, s4→s2, s5→s1, s6→s5
    pub fn t0() -> Taxonomy {
        Taxonomy::from_synsets(vec![
            synset("s1", Pos::Noun, &["organism", "being"], &[]),
            synset("s2", Pos::Noun, &["animal"], &["s1"]),
            synset("s3", Pos::Noun, &["dog"], &["s2"]),
            synset("s4", Pos::Noun, &["cat"], &["s2"]),
            synset("s5", Pos::Noun, &["plant"], &["s1"]),
            synset("s6", Pos::Noun, &["tree"], &["s5"]),
        ])
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::t0;
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loads_toy_file() {
        let t = Taxonomy::read_jsonl(t0().to_jsonl_string().as_bytes()).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.edge_count(), 5);
        assert_eq!(t, t0());
    }

    #[test]
    fn two_cycle_is_rejected() {
        let text = r#"{"id":"s1","pos":"n","words":["a"],"hypernyms":["s2"]}
{"id":"s2","pos":"n","words":["b"],"hypernyms":["s1"]}
{"id":"s3","pos":"n","words":["c"],"hypernyms":[]}"#;
        match Taxonomy::read_jsonl(text.as_bytes()) {
            Err(TaxonomyError::Cycle(id)) => assert!(id == "s1" || id == "s2"),
            other => panic!("expected cycle, got {other:?}"),
        }
        // no root at all
        let text = r#"{"id":"s1","pos":"n","words":["a"],"hypernyms":["s2"]}
{"id":"s2","pos":"n","words":["b"],"hypernyms":["s1"]}"#;
        assert!(matches!(
            Taxonomy::read_jsonl(text.as_bytes()),
            Err(TaxonomyError::Cycle(_))
        ));
    }

    #[test]
    fn dangling_hypernym_is_rejected() {
        let text = r#"{"id":"s1","pos":"n","words":["a"],"hypernyms":[]}
{"id":"s3","pos":"n","words":["c"],"hypernyms":["s9"]}"#;
        match Taxonomy::read_jsonl(text.as_bytes()) {
            Err(TaxonomyError::DanglingEdge { synset, hypernym }) => {
                assert_eq!((synset.as_str(), hypernym.as_str()), ("s3", "s9"))
            }
            other => panic!("expected dangling edge, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":\"s1\",\"pos\":\"n\",\"words\":[\"a\"],\"hypernyms\":[]}\n\nnot json\n";
        match Taxonomy::read_jsonl(text.as_bytes()) {
            Err(TaxonomyError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mixed_pos_is_rejected() {
        let err = Taxonomy::from_synsets(vec![
            synset("a", Pos::Noun, &["x"], &[]),
            synset("b", Pos::Verb, &["y"], &["a"]),
        ])
        .unwrap_err();
        assert!(matches!(err, TaxonomyError::PosMismatch { .. }));
    }

    #[test]
    fn lemmas_are_normalized() {
        let t = Taxonomy::from_synsets(vec![synset("a", Pos::Noun, &["  Hot   Dog ", "hot dog"], &[])])
            .unwrap();
        assert_eq!(t.synset("a").unwrap().words, vec!["hot dog"]);
        assert_eq!(t.synsets_of("hot dog"), &ids(&["a"])[..]);
    }

    #[test]
    fn hypernym_orders() {
        let t = t0();
        let h = t.hypernyms("s3", 2).unwrap();
        assert_eq!(h, BTreeMap::from([("s2".into(), 1), ("s1".into(), 2)]));
        assert!(t.hypernyms("s1", 2).unwrap().is_empty());
        assert!(matches!(
            t.hypernyms("zz", 1),
            Err(TaxonomyError::UnknownSynset(_))
        ));
    }

    #[test]
    fn diamond_takes_minimum_order() {
        let t = Taxonomy::from_synsets(vec![
            synset("r", Pos::Noun, &["r"], &[]),
            synset("a", Pos::Noun, &["a"], &["r"]),
            synset("b", Pos::Noun, &["b"], &["r"]),
            synset("x", Pos::Noun, &["x"], &["a", "b"]),
        ])
        .unwrap();
        let h = t.hypernyms("x", 2).unwrap();
        assert_eq!(
            h,
            BTreeMap::from([("a".into(), 1), ("b".into(), 1), ("r".into(), 2)])
        );
    }

    #[test]
    fn hyponym_lists() {
        let t = t0();
        assert_eq!(t.hyponyms("s2").unwrap(), &ids(&["s3", "s4"])[..]);
        assert!(t.hyponyms("s3").unwrap().is_empty());
        assert_eq!(t.hyponyms("s1").unwrap(), &ids(&["s2", "s5"])[..]);
    }

    #[test]
    fn components() {
        let t = t0();
        let c = t.connected_components(["s2", "s1", "s5"]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0], ["s1", "s2", "s5"].iter().map(|s| s.to_string()).collect());
        let c = t.connected_components(["s3", "s6"]).unwrap();
        assert_eq!(c.len(), 2);
        let c = t.connected_components(["s3"]).unwrap();
        assert_eq!(c, vec![BTreeSet::from(["s3".to_string()])]);
        assert!(t.connected_components(["s3", "nope"]).is_err());
    }

    #[test]
    fn attach_adds_leaf() {
        let t = t0();
        let (t2, id) = t.attach("puppy", &ids(&["s3"])).unwrap();
        assert_eq!(t2.len(), 7);
        assert_eq!(id, "new-1");
        assert_eq!(t2.hyponyms("s3").unwrap(), &ids(&["new-1"])[..]);
        assert_eq!(t2.synsets_of("puppy"), &ids(&["new-1"])[..]);
        // the original is unchanged
        assert_eq!(t, t0());
        let (t3, id2) = t2.attach("mutt", &ids(&["s3", "s4"])).unwrap();
        assert_eq!(id2, "new-2");
        assert_eq!(t3.parents("new-2"), &ids(&["s3", "s4"])[..]);
        assert!(matches!(
            t.attach("x", &ids(&["s9"])),
            Err(TaxonomyError::UnknownSynset(_))
        ));
        assert!(matches!(t.attach("  ", &ids(&["s1"])), Err(TaxonomyError::EmptyLemma)));
    }

    #[test]
    fn attached_taxonomy_round_trips() {
        let (t, _) = t0().attach("puppy", &ids(&["s3"])).unwrap();
        let text = t.to_jsonl_string();
        let back = Taxonomy::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_jsonl_string(), text);
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let t = t0();
        let order = t.topological_order();
        let pos: BTreeMap<_, _> = order.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        for (child, parent) in t.edges() {
            assert!(pos[parent] < pos[child]);
        }
    }

    /// Random DAG: node i may only point at nodes with smaller index.
    fn arb_dag() -> impl Strategy<Value = Taxonomy> {
        (2usize..15).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(any::<prop::sample::Index>(), 0..3), n)
                .prop_map(move |parents| {
                    let syns = parents.iter().enumerate().map(|(i, ps)| {
                        let hs: Vec<String> = if i == 0 {
                            vec![]
                        } else {
                            ps.iter().map(|p| format!("n{:02}", p.index(i))).collect()
                        };
                        Synset {
                            id: format!("n{i:02}"),
                            pos: Pos::Noun,
                            words: vec![format!("w{i}")],
                            hypernym_ids: hs,
                        }
                    });
                    Taxonomy::from_synsets(syns.collect::<Vec<_>>()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn hypernym_orders_are_prefix_consistent(t in arb_dag(), k in 1usize..5) {
            for id in t.ids() {
                let small = t.hypernyms(id, k).unwrap();
                let big: BTreeMap<_, _> = t.hypernyms(id, k + 1).unwrap()
                    .into_iter().filter(|(_, o)| *o <= k).collect();
                prop_assert_eq!(small, big);
            }
        }

        #[test]
        fn hyponym_is_inverse_of_direct_hypernym(t in arb_dag()) {
            for a in t.ids() {
                for b in t.ids() {
                    let down = t.hyponyms(a).unwrap().iter().any(|x| x == b);
                    let up = t.hypernyms(b, 1).unwrap().contains_key(a);
                    prop_assert_eq!(down, up);
                }
            }
        }

        #[test]
        fn components_partition_and_separate(t in arb_dag(), mask in proptest::collection::vec(any::<bool>(), 15)) {
            let chosen: Vec<&str> = t.ids().enumerate().filter(|(i, _)| mask[*i]).map(|(_, id)| id).collect();
            let comps = t.connected_components(chosen.iter().copied()).unwrap();
            let union: BTreeSet<String> = comps.iter().flatten().cloned().collect();
            prop_assert_eq!(union.len(), chosen.len());
            prop_assert_eq!(comps.iter().map(|c| c.len()).sum::<usize>(), chosen.len());
            for (i, a) in comps.iter().enumerate() {
                for b in comps.iter().skip(i + 1) {
                    for (c, p) in t.edges() {
                        let crosses = (a.contains(c) && b.contains(p)) || (b.contains(c) && a.contains(p));
                        prop_assert!(!crosses);
                    }
                }
            }
        }

        #[test]
        fn topological_sort_covers_every_node(t in arb_dag()) {
            prop_assert_eq!(t.topological_order().len(), t.len());
        }
    }
}
