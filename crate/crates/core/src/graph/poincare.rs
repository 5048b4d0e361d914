//! Poincaré ball embeddings trained with Riemannian SGD.
//!
//! Each hypernymy edge (u, v) contributes a softmax loss over negative
//! distances: `d(u,v) + log Σ_{x ∈ {v} ∪ N(u)} exp(−d(u,x))`, where the
//! negatives N(u) are nodes not adjacent to u. Euclidean gradients are
//! rescaled by the inverse metric `(1−‖θ‖²)²/4` and every point is pulled
//! back to norm ≤ 1−ε after each step.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{config_check, stream_rng, GraphError, Method, NodeEmbeddings, NodeGraph};
use crate::geometry::{poincare_distance, Geometry};
use crate::taxonomy::Taxonomy;

const INIT_STREAM: u64 = 11;
const TRAIN_STREAM: u64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr: f64,
    /// Epochs at the start run at `lr * burn_in_factor`.
    pub burn_in_epochs: usize,
    pub burn_in_factor: f64,
    pub epsilon: f64,
    pub init_range: f64,
    pub seed: u64,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig {
            dim: 10,
            epochs: 50,
            negatives: 10,
            lr: 0.01,
            burn_in_epochs: 10,
            burn_in_factor: 0.1,
            epsilon: 1e-5,
            init_range: 1e-3,
            seed: 0,
        }
    }
}

impl PoincareConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        config_check(self.dim > 0, "poincare dim must be positive")?;
        config_check(self.epochs > 0, "epochs must be positive")?;
        config_check(self.negatives > 0, "negatives must be positive")?;
        config_check(self.lr > 0.0, "lr must be positive")?;
        config_check(self.burn_in_factor > 0.0, "burn-in factor must be positive")?;
        config_check(
            self.epsilon > 0.0 && self.epsilon <= 1e-3,
            "ball epsilon must lie in (0, 1e-3]",
        )?;
        config_check(
            self.init_range > 0.0 && self.init_range < 0.5,
            "init range must lie in (0, 0.5)",
        )
    }
}

/// Euclidean gradient of d(u, v) with respect to `u`.
pub fn distance_grad_u(u: &[f64], v: &[f64]) -> Vec<f64> {
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let diff = uu - 2.0 * uv + vv;
    let alpha = 1.0 - uu;
    let beta = 1.0 - vv;
    let gamma = 1.0 + 2.0 * diff / (alpha * beta);
    let root = (gamma * gamma - 1.0).max(0.0).sqrt();
    if root < 1e-12 {
        return vec![0.0; u.len()];
    }
    let scale = 4.0 / (beta * root);
    let cu = (vv - 2.0 * uv + 1.0) / (alpha * alpha);
    u.iter()
        .zip(v)
        .map(|(a, b)| scale * (cu * a - b / alpha))
        .collect()
}

/// Softmax ranking loss of one positive pair against sampled negatives.
pub fn edge_loss(u: &[f64], v: &[f64], negs: &[&[f64]]) -> f64 {
    let d_pos = poincare_distance(u, v).expect("points inside the ball");
    let mut terms = vec![-d_pos];
    for n in negs {
        terms.push(-poincare_distance(u, n).expect("points inside the ball"));
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    d_pos + lse
}

fn project(x: &mut [f64], epsilon: f64) {
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let limit = 1.0 - epsilon;
    if n >= limit {
        let s = limit / n;
        x.iter_mut().for_each(|a| *a *= s);
    }
}

fn sample_negatives<R: Rng>(rng: &mut R, graph: &NodeGraph, u: usize, k: usize) -> Vec<usize> {
    let n = graph.n();
    let available = n - 1 - graph.neighbors[u].len();
    if available == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let x = rng.random_range(0..n);
        if x != u && !graph.adjacent(u, x) {
            out.push(x);
        }
    }
    out
}

pub fn train_poincare(taxonomy: &Taxonomy, cfg: &PoincareConfig) -> Result<NodeEmbeddings, GraphError> {
    cfg.validate()?;
    let graph = NodeGraph::new(taxonomy);
    if graph.edges.is_empty() {
        return Err(GraphError::NoEdges);
    }
    let dim = cfg.dim;
    let mut init = stream_rng(cfg.seed, INIT_STREAM);
    let mut emb: Vec<Vec<f64>> = (0..graph.n())
        .map(|_| {
            (0..dim)
                .map(|_| init.random_range(-cfg.init_range..cfg.init_range))
                .collect()
        })
        .collect();
    let mut rng = stream_rng(cfg.seed, TRAIN_STREAM);
    let mut edges = graph.edges.clone();

    for epoch in 0..cfg.epochs {
        let lr = if epoch < cfg.burn_in_epochs {
            cfg.lr * cfg.burn_in_factor
        } else {
            cfg.lr
        };
        edges.shuffle(&mut rng);
        for &(u, v) in &edges {
            let negs = sample_negatives(&mut rng, &graph, u, cfg.negatives);
            let targets: Vec<usize> = std::iter::once(v).chain(negs.iter().copied()).collect();
            let dists: Vec<f64> = targets
                .iter()
                .map(|&x| poincare_distance(&emb[u], &emb[x]).expect("inside ball"))
                .collect();
            let m = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = dists.iter().map(|d| (m - d).exp()).collect();
            let z: f64 = weights.iter().sum();

            let mut grad_u = vec![0.0; dim];
            let mut updates: Vec<(usize, Vec<f64>)> = Vec::with_capacity(targets.len() + 1);
            for (slot, &x) in targets.iter().enumerate() {
                // ∂loss/∂d(u,x) = [x is the positive] − softmax weight
                let coeff = if slot == 0 { 1.0 } else { 0.0 } - weights[slot] / z;
                if coeff == 0.0 {
                    continue;
                }
                let gu = distance_grad_u(&emb[u], &emb[x]);
                let gx = distance_grad_u(&emb[x], &emb[u]);
                grad_u.iter_mut().zip(&gu).for_each(|(a, g)| *a += coeff * g);
                updates.push((x, gx.into_iter().map(|g| coeff * g).collect()));
            }
            updates.push((u, grad_u));
            for (node, g) in updates {
                let p = &mut emb[node];
                let sq: f64 = p.iter().map(|a| a * a).sum();
                let scale = lr * (1.0 - sq).powi(2) / 4.0;
                p.iter_mut().zip(&g).for_each(|(a, gi)| *a -= scale * gi);
                project(p, cfg.epsilon);
                debug_assert!(p.iter().map(|a| a * a).sum::<f64>() < 1.0);
            }
        }
    }
    NodeEmbeddings::from_graph(Method::Poincare, Geometry::Poincare, &graph, dim, |i| emb[i].clone())
}
