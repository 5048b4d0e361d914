//! Pretrained word vectors, derived phrase/synset vectors and nearest-synset
//! search.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{self, Geometry};
use crate::taxonomy::{Synset, Taxonomy};

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("query vector has zero norm")]
    ZeroQuery,
    #[error("query vector has dimension {found}, index has {expected}")]
    QueryDimension { expected: usize, found: usize },
    #[error("query lies outside the Poincaré ball")]
    QueryOutOfBall,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows of a word2vec text file.
pub struct Word2VecRows<T> {
    pub dim: usize,
    pub tokens: Vec<String>,
    /// Row-major, `tokens.len() * dim` values.
    pub values: Vec<T>,
}

/// Parse word2vec text format: a `count dim` header, then `token v1 .. vdim`.
/// Duplicate tokens keep their first row.
pub fn read_word2vec<T, R>(reader: R) -> Result<Word2VecRows<T>, VectorError>
where
    T: FromStr + Copy + Into<f64>,
    R: BufRead,
{
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(VectorError::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    let bad_header = || VectorError::Parse {
        line: 1,
        message: format!("expected `count dim` header, got {header:?}"),
    };
    let mut head = header.split_whitespace();
    let count: usize = head.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
    let dim: usize = head.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
    if dim == 0 || head.next().is_some() {
        return Err(bad_header());
    }
    let mut tokens = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count * dim);
    let mut seen = HashMap::with_capacity(count);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line has a field");
        let start = values.len();
        let mut found = 0usize;
        for f in fields {
            let v: T = f.parse().map_err(|_| VectorError::Parse {
                line: lineno,
                message: format!("bad number {f:?}"),
            })?;
            if !v.into().is_finite() {
                return Err(VectorError::Parse {
                    line: lineno,
                    message: format!("non-finite value {f:?}"),
                });
            }
            values.push(v);
            found += 1;
        }
        if found != dim {
            return Err(VectorError::DimensionMismatch {
                line: lineno,
                expected: dim,
                found,
            });
        }
        if seen.insert(token.to_string(), ()).is_some() {
            values.truncate(start);
            continue;
        }
        tokens.push(token.to_string());
    }
    if rows != count {
        return Err(VectorError::Parse {
            line: 1,
            message: format!("header announces {count} rows, file has {rows}"),
        });
    }
    Ok(Word2VecRows { dim, tokens, values })
}

/// Write word2vec text format. Floats use the shortest round-trip form.
pub fn write_word2vec<'a, T, W, I>(mut out: W, dim: usize, rows: I) -> std::io::Result<()>
where
    T: Display + 'a,
    W: Write,
    I: ExactSizeIterator<Item = (&'a str, &'a [T])>,
{
    writeln!(out, "{} {}", rows.len(), dim)?;
    for (token, vals) in rows {
        write!(out, "{token}")?;
        for v in vals {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// A dense vector derived from the store, flagged when nothing resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TextVector {
    pub vector: Vec<f64>,
    pub miss: bool,
}

impl TextVector {
    fn hit(vector: Vec<f64>) -> Self {
        TextVector { vector, miss: false }
    }

    fn miss(dim: usize) -> Self {
        TextVector {
            vector: vec![0.0; dim],
            miss: true,
        }
    }

    /// `None` on a hard miss.
    pub fn into_option(self) -> Option<Vec<f64>> {
        (!self.miss).then_some(self.vector)
    }
}

/// Vocabulary of fixed-dimension word vectors.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Insert a vector; an existing token keeps its first vector.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim, "vector dimension");
        if self.index.contains_key(token) {
            return false;
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.data.extend(vector.iter().map(|&v| v as f32));
        true
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, VectorError> {
        let rows = read_word2vec::<f32, _>(reader)?;
        let index = rows
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(VectorStore {
            dim: rows.dim,
            tokens: rows.tokens,
            index,
            data: rows.values,
        })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, VectorError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_word2vec(
            out,
            self.dim,
            self.tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), &self.data[i * self.dim..(i + 1) * self.dim])),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Exact vocabulary lookup.
    pub fn get(&self, token: &str) -> Option<Vec<f64>> {
        self.index.get(token).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.data[i * self.dim..(i + 1) * self.dim]
            .iter()
            .map(|&v| v as f64)
            .collect()
    }

    /// Vector for a single token. Out-of-vocabulary tokens fall back to the
    /// longest vocabulary word that is a prefix of the token; with no such
    /// prefix the zero vector is returned with the miss flag set.
    pub fn word_vector(&self, token: &str) -> TextVector {
        if let Some(v) = self.get(token) {
            return TextVector::hit(v);
        }
        let mut cuts: Vec<usize> = token.char_indices().map(|(i, _)| i).skip(1).collect();
        cuts.reverse();
        for cut in cuts {
            if let Some(v) = self.get(&token[..cut]) {
                return TextVector::hit(v);
            }
        }
        TextVector::miss(self.dim)
    }

    /// Mean of the L2-normalized vectors of the whitespace tokens of
    /// `phrase`; tokens with zero vectors are skipped.
    pub fn phrase_vector(&self, phrase: &str) -> TextVector {
        let mut acc = vec![0.0; self.dim];
        let mut used = 0usize;
        for tok in phrase.split_whitespace() {
            let v = self.word_vector(tok).vector;
            let n = geometry::norm(&v);
            if n > 0.0 {
                acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x / n);
                used += 1;
            }
        }
        if used == 0 {
            return TextVector::miss(self.dim);
        }
        acc.iter_mut().for_each(|a| *a /= used as f64);
        TextVector::hit(acc)
    }

    /// Mean of the phrase vectors of every lemma of the synset.
    pub fn synset_vector(&self, syn: &Synset) -> TextVector {
        let mut acc = vec![0.0; self.dim];
        let mut any = false;
        for w in &syn.words {
            let pv = self.phrase_vector(w);
            any |= !pv.miss;
            acc.iter_mut().zip(&pv.vector).for_each(|(a, x)| *a += x);
        }
        if !any {
            return TextVector::miss(self.dim);
        }
        let n = syn.words.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        TextVector::hit(acc)
    }
}

/// Dense synset-vector matrix aligned to sorted synset ids, searchable by
/// the similarity of its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SynsetIndex {
    geometry: Geometry,
    dim: usize,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
    rows: Vec<f64>,
}

impl SynsetIndex {
    /// Build from `(id, vector)` pairs; rows are reordered by id.
    pub fn from_rows(geometry: Geometry, dim: usize, mut rows: Vec<(String, Vec<f64>)>) -> Self {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows.dedup_by(|a, b| a.0 == b.0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut ids = Vec::with_capacity(rows.len());
        for (id, v) in rows {
            assert_eq!(v.len(), dim, "row dimension for {id}");
            data.extend(v);
            ids.push(id);
        }
        let positions = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        SynsetIndex {
            geometry,
            dim,
            ids,
            positions,
            rows: data,
        }
    }

    /// One averaged text vector per synset of the taxonomy.
    pub fn from_text(store: &VectorStore, taxonomy: &Taxonomy) -> Self {
        let rows = taxonomy
            .synsets()
            .map(|s| (s.id.clone(), store.synset_vector(s).vector))
            .collect();
        Self::from_rows(Geometry::Euclidean, store.dim(), rows)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.positions.get(id).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Insert or replace a single row, keeping id order.
    pub fn upsert(&mut self, id: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "row dimension");
        if let Some(&i) = self.positions.get(id) {
            self.rows[i * self.dim..(i + 1) * self.dim].copy_from_slice(&vector);
            return;
        }
        let at = self.ids.partition_point(|x| x.as_str() < id);
        self.ids.insert(at, id.to_string());
        let off = at * self.dim;
        self.rows.splice(off..off, vector);
        for (i, id) in self.ids.iter().enumerate().skip(at) {
            self.positions.insert(id.clone(), i);
        }
    }

    /// The `k` most similar synsets to `query`, skipping ids in `mask`.
    /// Ties are broken by id; rows with zero norm score −∞.
    pub fn top_k(
        &self,
        query: &[f64],
        k: usize,
        mask: &BTreeSet<String>,
    ) -> Result<Vec<(String, f64)>, VectorError> {
        if query.len() != self.dim {
            return Err(VectorError::QueryDimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        match self.geometry {
            Geometry::Euclidean if geometry::norm(query) == 0.0 => {
                return Err(VectorError::ZeroQuery)
            }
            Geometry::Poincare if geometry::dot(query, query) >= 1.0 => {
                return Err(VectorError::QueryOutOfBall)
            }
            _ => {}
        }
        let geom = self.geometry;
        let mut scored: Vec<(usize, f64)> = (0..self.ids.len())
            .into_par_iter()
            .filter(|&i| !mask.contains(&self.ids[i]))
            .map(|i| (i, geom.similarity(query, self.row(i))))
            .collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(i, s)| (self.ids[i].clone(), s))
            .collect())
    }
}
