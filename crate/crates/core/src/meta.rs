//! Meta-embeddings: one vector space built from several source spaces.
//!
//! Four modes are supported. `concat` normalizes and concatenates the
//! source vectors, `svd` projects that concatenation onto its top right
//! singular vectors, and the two autoencoders learn one affine encoder and
//! decoder per source. CAEME concatenates the encodings and AAEME sums them;
//! both normalize the result. Autoencoders can additionally be trained with
//! a triplet loss that pulls taxonomy neighbours together.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Geometry};
use crate::linalg::top_right_singular;
use crate::space::{Mask, SimilaritySpace, SpaceError};
use crate::taxonomy::Taxonomy;
use crate::vectors::{SynsetIndex, VectorError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("a meta-embedding needs at least two sources, got {0}")]
    TooFewSources(usize),
    #[error("no token is covered by every source")]
    EmptyVocabulary,
    #[error("target dimension {target} exceeds the available rank {max}")]
    Rank { target: usize, max: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss became non-finite in epoch {0}")]
    NonFiniteLoss(usize),
    #[error("no source has a vector for {0:?}")]
    Miss(String),
    #[error("expected {expected} source vectors, got {found}")]
    SourceCount { expected: usize, found: usize },
    #[error("source {source_index} vector has dimension {found}, expected {expected}")]
    Dimension {
        source_index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn config_check(ok: bool, what: &str) -> Result<(), MetaError> {
    if ok {
        Ok(())
    } else {
        Err(MetaError::Config(what.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaMode {
    Concat,
    Svd,
    Caeme,
    Aaeme,
}

impl fmt::Display for MetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetaMode::Concat => "concat",
            MetaMode::Svd => "svd",
            MetaMode::Caeme => "caeme",
            MetaMode::Aaeme => "aaeme",
        })
    }
}

impl FromStr for MetaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "concat" => MetaMode::Concat,
            "svd" => MetaMode::Svd,
            "caeme" => MetaMode::Caeme,
            "aaeme" => MetaMode::Aaeme,
            other => return Err(format!("unknown meta mode {other:?}")),
        })
    }
}

/// Named spaces whose vectors feed a meta-embedding.
pub struct SourceSet<'a> {
    names: Vec<String>,
    spaces: Vec<&'a dyn SimilaritySpace>,
}

impl<'a> SourceSet<'a> {
    pub fn new(sources: Vec<(String, &'a dyn SimilaritySpace)>) -> Result<Self, MetaError> {
        if sources.len() < 2 {
            return Err(MetaError::TooFewSources(sources.len()));
        }
        let (names, spaces) = sources.into_iter().unzip();
        Ok(SourceSet { names, spaces })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim()).collect()
    }

    pub fn lookup(&self, taxonomy: &Taxonomy, token: &str, mask: &Mask) -> Vec<Option<Vec<f64>>> {
        self.spaces
            .iter()
            .map(|s| s.token_vector(taxonomy, token, mask))
            .collect()
    }

    /// Rows for the tokens every source resolves, in input order with
    /// duplicates dropped.
    pub fn shared_vocabulary<'t, I>(&self, taxonomy: &Taxonomy, tokens: I) -> Result<TrainingTable, MetaError>
    where
        I: IntoIterator<Item = &'t str>,
    {
        let mut seen = BTreeSet::new();
        let candidates: Vec<&str> = tokens.into_iter().filter(|t| seen.insert(*t)).collect();
        let mask = Mask::new();
        let resolved: Vec<Option<(String, Vec<Vec<f64>>)>> = candidates
            .par_iter()
            .map(|t| {
                let vs: Option<Vec<Vec<f64>>> = self.lookup(taxonomy, t, &mask).into_iter().collect();
                vs.map(|v| (t.to_string(), v))
            })
            .collect();
        let (tokens, rows) = resolved.into_iter().flatten().unzip();
        TrainingTable::new(self.dims(), tokens, rows)
    }
}

/// Source vectors of the shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    pub dims: Vec<usize>,
    pub tokens: Vec<String>,
    /// `rows[w][i]` is source `i`'s vector for `tokens[w]`.
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl TrainingTable {
    pub fn new(dims: Vec<usize>, tokens: Vec<String>, rows: Vec<Vec<Vec<f64>>>) -> Result<Self, MetaError> {
        if dims.len() < 2 {
            return Err(MetaError::TooFewSources(dims.len()));
        }
        if tokens.is_empty() {
            return Err(MetaError::EmptyVocabulary);
        }
        for row in &rows {
            check_inputs(&dims, row.len())?;
            for (i, v) in row.iter().enumerate() {
                check_dim(&dims, i, v.len())?;
            }
        }
        Ok(TrainingTable { dims, tokens, rows })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn inputs(&self, w: usize) -> Vec<Option<&[f64]>> {
        self.rows[w].iter().map(|v| Some(v.as_slice())).collect()
    }
}

fn check_inputs(dims: &[usize], found: usize) -> Result<(), MetaError> {
    if found != dims.len() {
        return Err(MetaError::SourceCount {
            expected: dims.len(),
            found,
        });
    }
    Ok(())
}

fn check_dim(dims: &[usize], i: usize, found: usize) -> Result<(), MetaError> {
    if found != dims[i] {
        return Err(MetaError::Dimension {
            source_index: i,
            expected: dims[i],
            found,
        });
    }
    Ok(())
}

/// Source vectors L2-normalized and concatenated; a missing source
/// contributes a zero block.
pub fn concat_meta(dims: &[usize], inputs: &[Option<&[f64]>]) -> Result<Vec<f64>, MetaError> {
    check_inputs(dims, inputs.len())?;
    if inputs.iter().all(Option::is_none) {
        return Err(MetaError::Miss("all sources".into()));
    }
    let mut out = Vec::with_capacity(dims.iter().sum());
    for (i, v) in inputs.iter().enumerate() {
        match v {
            Some(v) => {
                check_dim(dims, i, v.len())?;
                out.extend(geometry::normalized(v));
            }
            None => out.extend(std::iter::repeat_n(0.0, dims[i])),
        }
    }
    Ok(out)
}

/// `y = W x + b` with `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(input: usize, output: usize) -> Self {
        Affine {
            input,
            output,
            weight: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    fn glorot<R: Rng>(rng: &mut R, input: usize, output: usize) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weight = (0..input * output).map(|_| rng.random_range(-limit..limit)).collect();
        Affine {
            input,
            output,
            weight,
            bias: vec![0.0; output],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.input)
            .zip(&self.bias)
            .map(|(row, b)| geometry::dot(row, x) + b)
            .collect()
    }

    /// `Wᵀ g`.
    fn back(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input];
        for (row, gi) in self.weight.chunks_exact(self.input).zip(g) {
            out.iter_mut().zip(row).for_each(|(o, w)| *o += gi * w);
        }
        out
    }

    /// Accumulate `g xᵀ` and `g` into this (gradient) map.
    fn accumulate(&mut self, g: &[f64], x: &[f64]) {
        for (row, gi) in self.weight.chunks_exact_mut(self.input).zip(g) {
            row.iter_mut().zip(x).for_each(|(w, xj)| *w += gi * xj);
        }
        self.bias.iter_mut().zip(g).for_each(|(b, gi)| *b += gi);
    }

    fn add_scaled(&mut self, other: &Affine, scale: f64) {
        self.weight.iter_mut().zip(&other.weight).for_each(|(a, b)| *a += scale * b);
        self.bias.iter_mut().zip(&other.bias).for_each(|(a, b)| *a += scale * b);
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|x| x.is_finite())
    }
}

/// Per-source encoders and decoders of an autoencoder meta-embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    pub encoders: Vec<Affine>,
    pub decoders: Vec<Affine>,
}

impl AutoencoderParams {
    fn zeros_like(&self) -> Self {
        let z = |a: &Affine| Affine::zeros(a.input, a.output);
        AutoencoderParams {
            encoders: self.encoders.iter().map(z).collect(),
            decoders: self.decoders.iter().map(z).collect(),
        }
    }

    fn add_scaled(&mut self, other: &AutoencoderParams, scale: f64) {
        for (a, b) in self.encoders.iter_mut().zip(&other.encoders) {
            a.add_scaled(b, scale);
        }
        for (a, b) in self.decoders.iter_mut().zip(&other.decoders) {
            a.add_scaled(b, scale);
        }
    }

    fn maps_mut(&mut self) -> impl Iterator<Item = &mut Affine> {
        self.encoders.iter_mut().chain(self.decoders.iter_mut())
    }

    /// All parameters in a fixed order (encoders then decoders, weights
    /// before biases).
    pub fn flat(&self) -> Vec<f64> {
        self.encoders
            .iter()
            .chain(&self.decoders)
            .flat_map(|a| a.weight.iter().chain(&a.bias).copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        for a in self.maps_mut() {
            for w in a.weight.iter_mut().chain(a.bias.iter_mut()) {
                *w = it.next().expect("flat parameter count");
            }
        }
    }
}

/// Margin loss on meta-space distances.
pub fn triplet_loss(d_ap: f64, d_an: f64, margin: f64) -> f64 {
    (d_ap - d_an + margin).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletConfig {
    /// Positives and negatives drawn per anchor per epoch.
    pub k: usize,
    pub margin: f64,
    /// Weight of the reconstruction loss; the triplet loss gets `1 − alpha`.
    pub alpha: f64,
    /// Standard deviation of the noise that synthesizes positives for
    /// anchors without taxonomy neighbours.
    pub noise_sigma: f64,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            k: 5,
            margin: 0.1,
            alpha: 0.005,
            noise_sigma: 0.01,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        config_check(self.k >= 1, "triplet K must be at least 1")?;
        config_check(self.margin > 0.0, "triplet margin must be positive")?;
        config_check(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)")?;
        config_check(self.noise_sigma >= 0.0, "noise sigma must be non-negative")
    }
}

/// Positive side of a triplet.
#[derive(Debug, Clone, PartialEq)]
pub enum Positive {
    /// Index into the training table.
    Word(usize),
    /// The anchor's own meta vector plus this offset, with no gradient.
    Noise(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: Positive,
    pub negative: usize,
}

/// Lemmas related to `anchor`: the other lemmas of its synsets and the
/// lemmas of their direct hypernyms and hyponyms.
pub fn related_lemmas(taxonomy: &Taxonomy, anchor: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for id in taxonomy.synsets_of(anchor) {
        let neighbours = std::iter::once(id.as_str())
            .chain(taxonomy.parents(id).iter().map(String::as_str))
            .chain(taxonomy.children(id).iter().map(String::as_str));
        for nb in neighbours {
            if let Some(s) = taxonomy.synset(nb) {
                out.extend(s.words.iter().cloned());
            }
        }
    }
    out.remove(anchor);
    out
}

/// `K` triplets for one anchor. Positives come from the related lemmas that
/// are in the vocabulary; without any, they are noise around the anchor.
/// Negatives are drawn from the rest of the vocabulary.
pub fn sample_triplets<R: Rng>(
    taxonomy: &Taxonomy,
    vocab: &[String],
    anchor: usize,
    cfg: &TripletConfig,
    meta_dim: usize,
    rng: &mut R,
) -> Vec<Triplet> {
    let related = related_lemmas(taxonomy, &vocab[anchor]);
    let positives: Vec<usize> = (0..vocab.len()).filter(|&w| related.contains(&vocab[w])).collect();
    let negatives: Vec<usize> = (0..vocab.len())
        .filter(|&w| w != anchor && !related.contains(&vocab[w]))
        .collect();
    if negatives.is_empty() {
        return Vec::new();
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    (0..cfg.k)
        .map(|_| {
            let positive = match positives.choose(rng) {
                Some(&p) => Positive::Word(p),
                None => Positive::Noise((0..meta_dim).map(|_| noise.sample(rng)).collect()),
            };
            let negative = *negatives.choose(rng).expect("non-empty negatives");
            Triplet {
                anchor,
                positive,
                negative,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub mode: MetaMode,
    /// Target dimension for `svd`, shared encoding width for `aaeme`.
    /// Ignored by `concat` and `caeme`.
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub triplet: Option<TripletConfig>,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            mode: MetaMode::Aaeme,
            dim: 300,
            epochs: 50,
            batch_size: 128,
            step_size: 0.01,
            triplet: None,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        config_check(self.dim > 0, "meta dim must be positive")?;
        config_check(self.epochs > 0, "epochs must be positive")?;
        config_check(self.batch_size > 0, "batch size must be positive")?;
        config_check(self.step_size > 0.0, "step size must be positive")?;
        if let Some(t) = &self.triplet {
            t.validate()?;
        }
        Ok(())
    }
}

/// Where a source came from, recorded so a saved space can be rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceManifest {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// A fitted meta-embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSpace {
    pub version: u32,
    pub mode: MetaMode,
    pub meta_dim: usize,
    pub sources: Vec<SourceManifest>,
    /// Row-major `Σ dims × meta_dim` projection (`svd` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autoencoder: Option<AutoencoderParams>,
}

impl MetaSpace {
    pub fn dims(&self) -> Vec<usize> {
        self.sources.iter().map(|s| s.dim).collect()
    }

    pub fn concat(sources: Vec<SourceManifest>) -> Result<Self, MetaError> {
        if sources.len() < 2 {
            return Err(MetaError::TooFewSources(sources.len()));
        }
        let meta_dim = sources.iter().map(|s| s.dim).sum();
        Ok(MetaSpace {
            version: FORMAT_VERSION,
            mode: MetaMode::Concat,
            meta_dim,
            sources,
            projection: None,
            autoencoder: None,
        })
    }

    /// The meta vector of one token given each source's vector (or miss).
    pub fn encode(&self, inputs: &[Option<&[f64]>]) -> Result<Vec<f64>, MetaError> {
        let dims = self.dims();
        match self.mode {
            MetaMode::Concat => concat_meta(&dims, inputs),
            MetaMode::Svd => {
                let x = concat_meta(&dims, inputs)?;
                let p = self.projection.as_ref().expect("svd space has a projection");
                let mut out = vec![0.0; self.meta_dim];
                for (xi, row) in x.iter().zip(p.chunks_exact(self.meta_dim)) {
                    if *xi != 0.0 {
                        out.iter_mut().zip(row).for_each(|(o, v)| *o += xi * v);
                    }
                }
                Ok(out)
            }
            MetaMode::Caeme | MetaMode::Aaeme => {
                check_inputs(&dims, inputs.len())?;
                if inputs.iter().all(Option::is_none) {
                    return Err(MetaError::Miss("all sources".into()));
                }
                for (i, v) in inputs.iter().enumerate() {
                    if let Some(v) = v {
                        check_dim(&dims, i, v.len())?;
                    }
                }
                let params = self.autoencoder.as_ref().expect("autoencoder space has parameters");
                Ok(forward(self.mode, params, self.meta_dim, inputs).m)
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), MetaError> {
        let json = serde_json::to_string(self).map_err(|e| MetaError::Format(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MetaError> {
        let text = fs::read_to_string(path)?;
        let space: MetaSpace = serde_json::from_str(&text).map_err(|e| MetaError::Format(e.to_string()))?;
        if space.version != FORMAT_VERSION {
            return Err(MetaError::Format(format!(
                "unsupported meta-space version {}",
                space.version
            )));
        }
        Ok(space)
    }
}

/// Fit an SVD meta-embedding of dimension `dim` on the table.
pub fn fit_svd_meta(table: &TrainingTable, sources: Vec<SourceManifest>, dim: usize) -> Result<MetaSpace, MetaError> {
    let total: usize = table.dims.iter().sum();
    let max = total.min(table.len());
    if dim == 0 || dim > max {
        return Err(MetaError::Rank { target: dim, max });
    }
    let x = svd_matrix(table)?;
    let (_, v) = top_right_singular(&x, dim);
    let projection = (0..total).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| v[(r, c)]).collect();
    Ok(MetaSpace {
        version: FORMAT_VERSION,
        mode: MetaMode::Svd,
        meta_dim: dim,
        sources,
        projection: Some(projection),
        autoencoder: None,
    })
}

/// Concatenated rows of the table, one per token.
pub fn svd_matrix(table: &TrainingTable) -> Result<DMatrix<f64>, MetaError> {
    let total: usize = table.dims.iter().sum();
    let mut x = DMatrix::zeros(table.len(), total);
    for w in 0..table.len() {
        let row = concat_meta(&table.dims, &table.inputs(w))?;
        for (j, v) in row.into_iter().enumerate() {
            x[(w, j)] = v;
        }
    }
    Ok(x)
}

struct Forward {
    /// Normalized inputs, `None` for missing sources.
    x: Vec<Option<Vec<f64>>>,
    u_norm: f64,
    m: Vec<f64>,
}

fn encoding_width(mode: MetaMode, enc: &[Affine]) -> Vec<usize> {
    match mode {
        MetaMode::Caeme => enc.iter().map(|e| e.output).collect(),
        _ => vec![0; enc.len()],
    }
}

fn forward(mode: MetaMode, params: &AutoencoderParams, meta_dim: usize, inputs: &[Option<&[f64]>]) -> Forward {
    let mut u = vec![0.0; meta_dim];
    let mut offset = 0;
    let widths = encoding_width(mode, &params.encoders);
    let mut x = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let xi = input.map(geometry::normalized);
        if let Some(xi) = &xi {
            let h = params.encoders[i].apply(xi);
            u[offset..offset + h.len()].iter_mut().zip(&h).for_each(|(a, b)| *a += b);
        }
        offset += widths[i];
        x.push(xi);
    }
    let u_norm = geometry::norm(&u);
    let m = if u_norm > 0.0 {
        u.iter().map(|v| v / u_norm).collect()
    } else {
        u
    };
    Forward { x, u_norm, m }
}

/// Push a meta-vector gradient back into the encoders.
fn backward_encoders(
    mode: MetaMode,
    params: &AutoencoderParams,
    fw: &Forward,
    g_m: &[f64],
    grad: &mut AutoencoderParams,
) {
    if fw.u_norm == 0.0 {
        return;
    }
    let mg = geometry::dot(&fw.m, g_m);
    let g_u: Vec<f64> = g_m
        .iter()
        .zip(&fw.m)
        .map(|(g, m)| (g - m * mg) / fw.u_norm)
        .collect();
    let widths = encoding_width(mode, &params.encoders);
    let mut offset = 0;
    for (i, xi) in fw.x.iter().enumerate() {
        let out = params.encoders[i].output;
        if let Some(xi) = xi {
            grad.encoders[i].accumulate(&g_u[offset..offset + out], xi);
        }
        offset += widths[i];
    }
}

/// `1 − cos(s, y)` and its gradient with respect to `y`.
fn cosine_distance_grad(s: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let ns = geometry::norm(s);
    let ny = geometry::norm(y);
    if ns == 0.0 || ny == 0.0 {
        return (1.0, vec![0.0; y.len()]);
    }
    let c = geometry::dot(s, y) / (ns * ny);
    let g = s
        .iter()
        .zip(y)
        .map(|(si, yi)| -(si / (ns * ny) - c * yi / (ny * ny)))
        .collect();
    (1.0 - c, g)
}

/// Objective of an autoencoder meta-embedding over a batch.
pub struct AutoencoderProblem<'a> {
    pub mode: MetaMode,
    pub meta_dim: usize,
    pub table: &'a TrainingTable,
    pub triplet: Option<&'a TripletConfig>,
}

impl AutoencoderProblem<'_> {
    /// Mean loss over `batch` (table indices) and its gradient. `triplets`
    /// lists the triplets of every anchor in the batch.
    pub fn loss_and_grad(
        &self,
        params: &AutoencoderParams,
        batch: &[usize],
        triplets: &[Vec<Triplet>],
    ) -> (f64, AutoencoderParams) {
        let chunks: Vec<(f64, AutoencoderParams)> = batch
            .par_chunks(8)
            .zip(triplets.par_chunks(8))
            .map(|(words, trips)| {
                let mut grad = params.zeros_like();
                let mut loss = 0.0;
                for (&w, t) in words.iter().zip(trips) {
                    loss += self.word_loss(params, w, t, &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &chunks {
            loss += l;
            grad.add_scaled(g, 1.0);
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut out = params.zeros_like();
        out.add_scaled(&grad, scale);
        (loss * scale, out)
    }

    fn encode_row(&self, params: &AutoencoderParams, w: usize) -> Forward {
        forward(self.mode, params, self.meta_dim, &self.table.inputs(w))
    }

    fn word_loss(&self, params: &AutoencoderParams, w: usize, trips: &[Triplet], grad: &mut AutoencoderParams) -> f64 {
        let (recon_weight, trip_weight) = match self.triplet {
            Some(t) => (t.alpha, 1.0 - t.alpha),
            None => (1.0, 0.0),
        };
        let fw = self.encode_row(params, w);
        let mut g_m = vec![0.0; self.meta_dim];
        let mut recon = 0.0;
        for (i, s) in self.table.rows[w].iter().enumerate() {
            if geometry::norm(s) == 0.0 {
                continue;
            }
            let dec = &params.decoders[i];
            let y = dec.apply(&fw.m);
            let (d, g_y) = cosine_distance_grad(s, &y);
            recon += d;
            let g_y: Vec<f64> = g_y.iter().map(|g| g * recon_weight).collect();
            grad.decoders[i].accumulate(&g_y, &fw.m);
            g_m.iter_mut().zip(dec.back(&g_y)).for_each(|(a, b)| *a += b);
        }
        let mut loss = recon_weight * recon;

        if let Some(cfg) = self.triplet.filter(|_| !trips.is_empty()) {
            let per = trip_weight / trips.len() as f64;
            let mut trip_total = 0.0;
            for t in trips {
                let fn_ = self.encode_row(params, t.negative);
                let (mp, fp) = match &t.positive {
                    Positive::Word(p) => {
                        let fp = self.encode_row(params, *p);
                        (fp.m.clone(), Some(fp))
                    }
                    Positive::Noise(e) => (fw.m.iter().zip(e).map(|(a, b)| a + b).collect(), None),
                };
                let d_ap_vec: Vec<f64> = fw.m.iter().zip(&mp).map(|(a, b)| a - b).collect();
                let d_an_vec: Vec<f64> = fw.m.iter().zip(&fn_.m).map(|(a, b)| a - b).collect();
                let d_ap = geometry::norm(&d_ap_vec);
                let d_an = geometry::norm(&d_an_vec);
                let l = triplet_loss(d_ap, d_an, cfg.margin);
                trip_total += l;
                if l <= 0.0 {
                    continue;
                }
                let unit = |v: &[f64], d: f64| -> Vec<f64> {
                    if d > 0.0 {
                        v.iter().map(|x| x / d).collect()
                    } else {
                        vec![0.0; v.len()]
                    }
                };
                let ap = unit(&d_ap_vec, d_ap);
                let an = unit(&d_an_vec, d_an);
                // the noise positive moves with the anchor, so it adds no gradient
                if let Some(fp) = &fp {
                    g_m.iter_mut().zip(ap.iter().zip(&an)).for_each(|(g, (a, n))| *g += per * (a - n));
                    let g_p: Vec<f64> = ap.iter().map(|a| -per * a).collect();
                    backward_encoders(self.mode, params, fp, &g_p, grad);
                } else {
                    g_m.iter_mut().zip(&an).for_each(|(g, n)| *g -= per * n);
                }
                let g_n: Vec<f64> = an.iter().map(|n| per * n).collect();
                backward_encoders(self.mode, params, &fn_, &g_n, grad);
            }
            loss += per * trip_total;
        }
        backward_encoders(self.mode, params, &fw, &g_m, grad);
        loss
    }
}

/// Initial parameters for an autoencoder of the given mode.
pub fn init_autoencoder(mode: MetaMode, dims: &[usize], dim: usize, seed: u64) -> (AutoencoderParams, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (widths, meta_dim): (Vec<usize>, usize) = match mode {
        MetaMode::Caeme => (dims.to_vec(), dims.iter().sum()),
        _ => (vec![dim; dims.len()], dim),
    };
    let encoders = dims.iter().zip(&widths).map(|(&d, &e)| Affine::glorot(&mut rng, d, e)).collect();
    let decoders = dims.iter().map(|&d| Affine::glorot(&mut rng, meta_dim, d)).collect();
    (AutoencoderParams { encoders, decoders }, meta_dim)
}

/// Result of autoencoder fitting, with the full-table loss before training
/// and after each epoch.
pub struct AutoencoderFit {
    pub space: MetaSpace,
    pub history: Vec<f64>,
}

pub fn fit_autoencoder_meta(
    table: &TrainingTable,
    sources: Vec<SourceManifest>,
    cfg: &MetaConfig,
    taxonomy: Option<&Taxonomy>,
) -> Result<AutoencoderFit, MetaError> {
    cfg.validate()?;
    if !matches!(cfg.mode, MetaMode::Caeme | MetaMode::Aaeme) {
        return Err(MetaError::Config(format!("{} is not an autoencoder mode", cfg.mode)));
    }
    check_inputs(&table.dims, sources.len())?;
    let taxonomy = match (&cfg.triplet, taxonomy) {
        (Some(_), None) => return Err(MetaError::Config("triplet loss needs a taxonomy".into())),
        (_, t) => t,
    };
    let (mut params, meta_dim) = init_autoencoder(cfg.mode, &table.dims, cfg.dim, cfg.seed);
    let problem = AutoencoderProblem {
        mode: cfg.mode,
        meta_dim,
        table,
        triplet: cfg.triplet.as_ref(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let all: Vec<usize> = (0..table.len()).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<Triplet>> {
        match (&cfg.triplet, taxonomy) {
            (Some(t), Some(tax)) => all
                .iter()
                .map(|&w| sample_triplets(tax, &table.tokens, w, t, meta_dim, rng))
                .collect(),
            _ => vec![Vec::new(); table.len()],
        }
    };
    let mut triplets = draw(&mut rng);
    let mut history = vec![problem.loss_and_grad(&params, &all, &triplets).0];
    let mut order = all.clone();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let trips: Vec<Vec<Triplet>> = batch.iter().map(|&w| triplets[w].clone()).collect();
            let (_, grad) = problem.loss_and_grad(&params, batch, &trips);
            params.add_scaled(&grad, -cfg.step_size);
        }
        if !params.encoders.iter().chain(&params.decoders).all(Affine::is_finite) {
            return Err(MetaError::NonFiniteLoss(epoch));
        }
        let loss = problem.loss_and_grad(&params, &all, &triplets).0;
        if !loss.is_finite() {
            return Err(MetaError::NonFiniteLoss(epoch));
        }
        log::debug!("{} epoch {epoch}: loss {loss}", cfg.mode);
        history.push(loss);
        if epoch + 1 < cfg.epochs {
            triplets = draw(&mut rng);
        }
    }
    Ok(AutoencoderFit {
        space: MetaSpace {
            version: FORMAT_VERSION,
            mode: cfg.mode,
            meta_dim,
            sources,
            projection: None,
            autoencoder: Some(params),
        },
        history,
    })
}

/// Fit any mode. `dim` is the SVD target or the AAEME width.
pub fn fit_meta(
    table: &TrainingTable,
    sources: Vec<SourceManifest>,
    cfg: &MetaConfig,
    taxonomy: Option<&Taxonomy>,
) -> Result<MetaSpace, MetaError> {
    match cfg.mode {
        MetaMode::Concat => MetaSpace::concat(sources),
        MetaMode::Svd => fit_svd_meta(table, sources, cfg.dim),
        MetaMode::Caeme | MetaMode::Aaeme => fit_autoencoder_meta(table, sources, cfg, taxonomy).map(|f| f.space),
    }
}

/// A fitted meta-embedding over live source spaces.
pub struct MetaView {
    meta: MetaSpace,
    sources: Vec<Box<dyn SimilaritySpace>>,
    index: SynsetIndex,
}

impl MetaView {
    /// Synsets no source can place get a zero row.
    pub fn new(meta: MetaSpace, sources: Vec<Box<dyn SimilaritySpace>>, taxonomy: &Taxonomy) -> Result<Self, MetaError> {
        check_inputs(&meta.dims(), sources.len())?;
        for (i, s) in sources.iter().enumerate() {
            check_dim(&meta.dims(), i, s.dim())?;
        }
        let ids: Vec<&str> = taxonomy.ids().collect();
        let rows: Vec<(String, Vec<f64>)> = ids
            .par_iter()
            .map(|id| {
                let v = Self::encode_synset(&meta, &sources, id).unwrap_or_else(|| vec![0.0; meta.meta_dim]);
                (id.to_string(), v)
            })
            .collect();
        let index = SynsetIndex::from_rows(Geometry::Euclidean, meta.meta_dim, rows);
        Ok(MetaView { meta, sources, index })
    }

    fn encode_synset(meta: &MetaSpace, sources: &[Box<dyn SimilaritySpace>], id: &str) -> Option<Vec<f64>> {
        let inputs: Vec<Option<&[f64]>> = sources.iter().map(|s| s.synset_vector(id)).collect();
        meta.encode(&inputs).ok()
    }

    pub fn meta(&self) -> &MetaSpace {
        &self.meta
    }

    pub fn index(&self) -> &SynsetIndex {
        &self.index
    }
}

impl SimilaritySpace for MetaView {
    fn geometry(&self) -> Geometry {
        Geometry::Euclidean
    }

    fn dim(&self) -> usize {
        self.meta.meta_dim
    }

    fn token_vector(&self, taxonomy: &Taxonomy, token: &str, mask: &Mask) -> Option<Vec<f64>> {
        let vs: Vec<Option<Vec<f64>>> = self
            .sources
            .iter()
            .map(|s| s.token_vector(taxonomy, token, mask))
            .collect();
        let inputs: Vec<Option<&[f64]>> = vs.iter().map(|v| v.as_deref()).collect();
        self.meta.encode(&inputs).ok()
    }

    fn synset_vector(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id)
    }

    fn nearest_synsets(&self, query: &[f64], k: usize, mask: &Mask) -> Result<Vec<(String, f64)>, VectorError> {
        self.index.top_k(query, k, mask)
    }

    fn insert_synset(&mut self, taxonomy: &Taxonomy, id: &str) -> Result<(), SpaceError> {
        for s in &mut self.sources {
            s.insert_synset(taxonomy, id)?;
        }
        let v = Self::encode_synset(&self.meta, &self.sources, id).ok_or_else(|| SpaceError::Miss(id.to_string()))?;
        self.index.upsert(id, v);
        Ok(())
    }
}
