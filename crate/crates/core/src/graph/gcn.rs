//! Two-layer graph-convolutional autoencoder over text features.
//!
//! Encoder `Z = Â·relu(Â·X·W0)·W1` with the symmetrically normalized,
//! self-looped, undirected adjacency `Â`. The decoder scores a pair by
//! `σ(zᵢ·zⱼ)`; training minimizes binary cross-entropy over all edges plus
//! as many uniformly sampled non-edges.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{config_check, feature_matrix, stream_rng, GraphError, Method, NodeEmbeddings, NodeGraph};
use crate::geometry::Geometry;
use crate::linalg::SparseRows;
use crate::taxonomy::Taxonomy;
use crate::vectors::SynsetIndex;

const INIT_STREAM: u64 = 31;
const SAMPLE_STREAM: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dim: usize,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 128,
            dim: 64,
            steps: 200,
            step_size: 0.01,
            seed: 0,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        config_check(self.hidden > 0 && self.dim > 0, "gcn widths must be positive")?;
        config_check(self.steps > 0, "steps must be positive")?;
        config_check(self.step_size > 0.0, "step size must be positive")
    }
}

/// Trained encoder weights, kept so unseen words can be embedded from their
/// text vector alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub dim: usize,
    /// Row-major `input_dim × hidden`.
    pub w0: Vec<f64>,
    /// Row-major `hidden × dim`.
    pub w1: Vec<f64>,
}

impl GcnModel {
    pub fn glorot<R: Rng>(rng: &mut R, input_dim: usize, hidden: usize, dim: usize) -> Self {
        let mut init = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect()
        };
        let w0 = init(input_dim, hidden);
        let w1 = init(hidden, dim);
        GcnModel { input_dim, hidden, dim, w0, w1 }
    }

    fn w0(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.input_dim, self.hidden, &self.w0)
    }

    fn w1(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.hidden, self.dim, &self.w1)
    }

    /// Forward pass of a node with no neighbours: its normalized adjacency
    /// row is just the self-loop with weight 1.
    pub fn embed_isolated(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "feature dimension");
        let mut h = vec![0.0; self.hidden];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let row = &self.w0[i * self.hidden..(i + 1) * self.hidden];
            h.iter_mut().zip(row).for_each(|(a, w)| *a += xi * w);
        }
        let mut z = vec![0.0; self.dim];
        for (j, hj) in h.iter().enumerate() {
            if *hj <= 0.0 {
                continue;
            }
            let row = &self.w1[j * self.dim..(j + 1) * self.dim];
            z.iter_mut().zip(row).for_each(|(a, w)| *a += hj * w);
        }
        z
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let json = serde_json::to_string(self).map_err(|e| GraphError::Format(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path)?;
        let model: GcnModel = serde_json::from_str(&text).map_err(|e| GraphError::Format(e.to_string()))?;
        if model.w0.len() != model.input_dim * model.hidden || model.w1.len() != model.hidden * model.dim {
            return Err(GraphError::Format("gcn weight shapes do not match header".into()));
        }
        Ok(model)
    }
}

/// `D^{-1/2}(A + Aᵀ + I)D^{-1/2}` with multi-edges collapsed.
pub fn normalized_adjacency(graph: &NodeGraph) -> SparseRows {
    let deg: Vec<f64> = graph.neighbors.iter().map(|nb| nb.len() as f64 + 1.0).collect();
    let rows = graph
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut row: Vec<(usize, f64)> = nb
                .iter()
                .map(|&j| (j, 1.0 / (deg[i] * deg[j]).sqrt()))
                .collect();
            row.push((i, 1.0 / deg[i]));
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    SparseRows { rows }
}

/// A labelled pair for the edge decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub label: f64,
}

/// Every edge as a positive plus sampled non-edges: as many as there are
/// edges, or `n` when the graph has none.
pub fn sample_pairs<R: Rng>(rng: &mut R, graph: &NodeGraph) -> Vec<Pair> {
    let n = graph.n();
    let mut pairs: Vec<Pair> = graph
        .edges
        .iter()
        .map(|&(a, b)| Pair { a, b, label: 1.0 })
        .collect();
    let non_edges: usize = (0..n).map(|i| n - 1 - graph.neighbors[i].len()).sum();
    if non_edges == 0 {
        return pairs;
    }
    let wanted = if graph.edges.is_empty() { n } else { graph.edges.len() };
    for _ in 0..wanted {
        loop {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !graph.adjacent(a, b) {
                pairs.push(Pair { a, b, label: 0.0 });
                break;
            }
        }
    }
    pairs
}

/// Precomputed propagation for one graph and feature matrix.
pub struct GcnProblem {
    pub adjacency: SparseRows,
    /// `Â·X`.
    ax: DMatrix<f64>,
}

pub struct Forward {
    pub h1: DMatrix<f64>,
    pub ar: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GcnProblem {
    pub fn new(graph: &NodeGraph, features: &DMatrix<f64>) -> Self {
        let adjacency = normalized_adjacency(graph);
        let ax = adjacency.mul(features);
        GcnProblem { adjacency, ax }
    }

    pub fn forward(&self, model: &GcnModel) -> Forward {
        let h1 = &self.ax * model.w0();
        let r = h1.map(|v| v.max(0.0));
        let ar = self.adjacency.mul(&r);
        let z = &ar * model.w1();
        Forward { h1, ar, z }
    }

    /// Mean cross-entropy over `pairs` and its gradients `(∂W0, ∂W1)`, both
    /// row-major like the model.
    pub fn loss_and_grad(&self, model: &GcnModel, pairs: &[Pair]) -> (f64, Vec<f64>, Vec<f64>) {
        let fw = self.forward(model);
        if pairs.is_empty() {
            return (0.0, vec![0.0; model.w0.len()], vec![0.0; model.w1.len()]);
        }
        let count = pairs.len() as f64;
        let mut loss = 0.0;
        let mut gz = DMatrix::zeros(fw.z.nrows(), fw.z.ncols());
        for p in pairs {
            let s = fw.z.row(p.a).dot(&fw.z.row(p.b));
            loss += softplus(s) - p.label * s;
            let g = (sigmoid(s) - p.label) / count;
            let za = fw.z.row(p.a).clone_owned();
            let zb = fw.z.row(p.b).clone_owned();
            let mut ra = gz.row_mut(p.a);
            ra += zb * g;
            let mut rb = gz.row_mut(p.b);
            rb += za * g;
        }
        let gw1 = fw.ar.transpose() * &gz;
        let mut gh = self.adjacency.mul(&(gz * model.w1().transpose()));
        gh.zip_apply(&fw.h1, |g, h| {
            if h <= 0.0 {
                *g = 0.0
            }
        });
        let gw0 = self.ax.transpose() * gh;
        (loss / count, row_major(&gw0), row_major(&gw1))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Train the autoencoder; also returns the loss at every step.
pub fn train_gcn_with_history(
    taxonomy: &Taxonomy,
    features: &SynsetIndex,
    cfg: &GcnConfig,
) -> Result<(NodeEmbeddings, GcnModel, Vec<f64>), GraphError> {
    cfg.validate()?;
    let graph = NodeGraph::new(taxonomy);
    let x = feature_matrix(&graph, features)?;
    let problem = GcnProblem::new(&graph, &x);
    let mut model = GcnModel::glorot(&mut stream_rng(cfg.seed, INIT_STREAM), x.ncols(), cfg.hidden, cfg.dim);
    let mut rng = stream_rng(cfg.seed, SAMPLE_STREAM);
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let pairs = sample_pairs(&mut rng, &graph);
        let (loss, g0, g1) = problem.loss_and_grad(&model, &pairs);
        if !loss.is_finite() {
            return Err(GraphError::NonFiniteLoss(step));
        }
        history.push(loss);
        model.w0.iter_mut().zip(&g0).for_each(|(w, g)| *w -= cfg.step_size * g);
        model.w1.iter_mut().zip(&g1).for_each(|(w, g)| *w -= cfg.step_size * g);
    }
    let z = problem.forward(&model).z;
    let emb = NodeEmbeddings::from_graph(Method::Gcn, Geometry::Euclidean, &graph, cfg.dim, |i| {
        z.row(i).iter().copied().collect()
    })?;
    Ok((emb, model, history))
}

pub fn train_gcn(
    taxonomy: &Taxonomy,
    features: &SynsetIndex,
    cfg: &GcnConfig,
) -> Result<(NodeEmbeddings, GcnModel), GraphError> {
    train_gcn_with_history(taxonomy, features, cfg).map(|(e, m, _)| (e, m))
}
