//! Node embeddings of the taxonomy graph.
//!
//! Five trainers share one output type, [`NodeEmbeddings`]: node2vec
//! (biased walks + skip-gram), Poincaré ball embeddings, TADW (text-aware
//! matrix factorization), HOPE (Katz-index SVD) and a two-layer GCN
//! autoencoder. [`GraphSpace`] projects out-of-taxonomy words into any of
//! them.

pub mod gcn;
pub mod hope;
pub mod node2vec;
pub mod oov;
pub mod poincare;
pub mod tadw;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Geometry;
use crate::taxonomy::Taxonomy;
use crate::vectors::{read_word2vec, write_word2vec, SynsetIndex, VectorError};

pub use gcn::{train_gcn, GcnConfig, GcnModel};
pub use hope::{train_hope, HopeConfig};
pub use node2vec::{train_node2vec, Node2VecConfig};
pub use oov::{project_oov, GraphSpace};
pub use poincare::{train_poincare, PoincareConfig};
pub use tadw::{train_tadw, TadwConfig};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear solve failed: {0}")]
    SingularSolve(String),
    #[error("loss became non-finite at step {0}")]
    NonFiniteLoss(usize),
    #[error("text features missing for synset {0}")]
    MissingFeatures(String),
    #[error("embedding for {0} is invalid for its geometry")]
    InvalidEmbedding(String),
    #[error("taxonomy has no hypernymy edges")]
    NoEdges,
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn config_check(ok: bool, what: &str) -> Result<(), GraphError> {
    if ok {
        Ok(())
    } else {
        Err(GraphError::Config(what.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Node2vec,
    Poincare,
    Tadw,
    Hope,
    Gcn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Node2vec => "node2vec",
            Method::Poincare => "poincare",
            Method::Tadw => "tadw",
            Method::Hope => "hope",
            Method::Gcn => "gcn",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "node2vec" => Method::Node2vec,
            "poincare" => Method::Poincare,
            "tadw" => Method::Tadw,
            "hope" => Method::Hope,
            "gcn" => Method::Gcn,
            other => return Err(format!("unknown embedding method {other:?}")),
        })
    }
}

/// Synset vectors in a tagged geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    method: Method,
    index: SynsetIndex,
}

impl NodeEmbeddings {
    /// Validates finiteness and, for the ball, that every norm is below 1.
    pub fn new(method: Method, index: SynsetIndex) -> Result<Self, GraphError> {
        for (i, id) in index.ids().iter().enumerate() {
            let row = index.row(i);
            let finite = row.iter().all(|x| x.is_finite());
            let inside = index.geometry() != Geometry::Poincare
                || row.iter().map(|x| x * x).sum::<f64>() < 1.0;
            if !finite || !inside {
                return Err(GraphError::InvalidEmbedding(id.clone()));
            }
        }
        Ok(NodeEmbeddings { method, index })
    }

    pub(crate) fn from_graph(
        method: Method,
        geometry: Geometry,
        graph: &NodeGraph,
        dim: usize,
        rows: impl Fn(usize) -> Vec<f64>,
    ) -> Result<Self, GraphError> {
        let rows = graph
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), rows(i)))
            .collect();
        Self::new(method, SynsetIndex::from_rows(geometry, dim, rows))
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn geometry(&self) -> Geometry {
        self.index.geometry()
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id)
    }

    pub fn index(&self) -> &SynsetIndex {
        &self.index
    }

    pub fn into_index(self) -> SynsetIndex {
        self.index
    }

    pub(crate) fn upsert(&mut self, id: &str, vector: Vec<f64>) {
        self.index.upsert(id, vector);
    }

    /// Path of the one-line header recording geometry and method.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".meta");
        PathBuf::from(p)
    }

    /// Write word2vec text (synset ids as tokens) plus the `.meta` sidecar.
    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let mut out = BufWriter::new(File::create(path)?);
        let idx = &self.index;
        write_word2vec(
            &mut out,
            idx.dim(),
            idx.ids()
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), idx.row(i))),
        )?;
        out.flush()?;
        std::fs::write(
            Self::sidecar_path(path),
            format!("geometry={} method={}\n", self.geometry(), self.method),
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let header = std::fs::read_to_string(Self::sidecar_path(path))?;
        let mut geometry = None;
        let mut method = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("geometry", g)) => geometry = Some(g.parse().map_err(GraphError::Format)?),
                Some(("method", m)) => method = Some(m.parse().map_err(GraphError::Format)?),
                _ => return Err(GraphError::Format(format!("bad sidecar field {field:?}"))),
            }
        }
        let (geometry, method) = match (geometry, method) {
            (Some(g), Some(m)) => (g, m),
            _ => return Err(GraphError::Format("sidecar needs geometry= and method=".into())),
        };
        Self::read(BufReader::new(File::open(path)?), geometry, method)
    }

    pub fn read<R: BufRead>(reader: R, geometry: Geometry, method: Method) -> Result<Self, GraphError> {
        let rows = read_word2vec::<f64, _>(reader)?;
        let dim = rows.dim;
        let data = rows
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, rows.values[i * dim..(i + 1) * dim].to_vec()))
            .collect();
        Self::new(method, SynsetIndex::from_rows(geometry, dim, data))
    }
}

/// Taxonomy as an indexed graph; node `i` is the `i`-th synset in id order.
#[derive(Debug, Clone)]
pub struct NodeGraph {
    pub ids: Vec<String>,
    pub positions: HashMap<String, usize>,
    /// Directed (child, parent) edges.
    pub edges: Vec<(usize, usize)>,
    /// Sorted undirected neighbor lists.
    pub neighbors: Vec<Vec<usize>>,
}

impl NodeGraph {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        let ids: Vec<String> = taxonomy.ids().map(String::from).collect();
        let positions: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let edges: Vec<(usize, usize)> = taxonomy
            .edges()
            .map(|(c, p)| (positions[c], positions[p]))
            .collect();
        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(c, p) in &edges {
            neighbors[c].push(p);
            neighbors[p].push(c);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        NodeGraph {
            ids,
            positions,
            edges,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }
}

/// Deterministic generator for a (seed, stream) pair.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Text-feature matrix rows aligned with the graph's node order.
pub(crate) fn feature_matrix(
    graph: &NodeGraph,
    features: &SynsetIndex,
) -> Result<nalgebra::DMatrix<f64>, GraphError> {
    let mut x = nalgebra::DMatrix::zeros(graph.n(), features.dim());
    for (i, id) in graph.ids.iter().enumerate() {
        let row = features
            .get(id)
            .ok_or_else(|| GraphError::MissingFeatures(id.clone()))?;
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    Ok(x)
}
