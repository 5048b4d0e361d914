//! node2vec: second-order biased random walks fed to skip-gram with
//! negative sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{config_check, stream_rng, GraphError, Method, NodeEmbeddings, NodeGraph};
use crate::geometry::Geometry;
use crate::taxonomy::Taxonomy;

const WALK_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Node2VecConfig {
    pub dim: usize,
    pub walk_length: usize,
    pub num_walks: usize,
    /// Return parameter; returning to the previous node has weight 1/p.
    pub p: f64,
    /// In-out parameter; moving away from the previous node has weight 1/q.
    pub q: f64,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for Node2VecConfig {
    fn default() -> Self {
        Node2VecConfig {
            dim: 300,
            walk_length: 30,
            num_walks: 200,
            p: 1.0,
            q: 1.0,
            window: 10,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            seed: 0,
        }
    }
}

impl Node2VecConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        config_check(self.dim > 0, "node2vec dim must be positive")?;
        config_check(self.walk_length > 0, "walk_length must be positive")?;
        config_check(self.num_walks > 0, "num_walks must be positive")?;
        config_check(self.p > 0.0 && self.p.is_finite(), "p must be positive")?;
        config_check(self.q > 0.0 && self.q.is_finite(), "q must be positive")?;
        config_check(self.window > 0, "window must be positive")?;
        config_check(self.negatives > 0, "negatives must be positive")?;
        config_check(self.epochs > 0, "epochs must be positive")?;
        config_check(
            self.lr_start > 0.0 && self.lr_end > 0.0,
            "learning rates must be positive",
        )
    }
}

/// Next-step distribution from `cur`, given the node the walk came from.
///
/// Returns `(neighbor, probability)` pairs in neighbor order.
pub fn transition_probabilities(
    graph: &NodeGraph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
) -> Vec<(usize, f64)> {
    let weights: Vec<(usize, f64)> = graph.neighbors[cur]
        .iter()
        .map(|&x| {
            let w = match prev {
                None => 1.0,
                Some(t) if x == t => 1.0 / p,
                Some(t) if graph.adjacent(t, x) => 1.0,
                Some(_) => 1.0 / q,
            };
            (x, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn sample_next<R: Rng>(rng: &mut R, dist: &[(usize, f64)]) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for &(x, pr) in dist {
        acc += pr;
        if r < acc {
            return x;
        }
    }
    dist.last().expect("non-empty distribution").0
}

/// All walks, grouped by start node. Each node draws from its own generator
/// so the corpus does not depend on scheduling.
pub fn sample_walks(graph: &NodeGraph, cfg: &Node2VecConfig) -> Vec<Vec<usize>> {
    (0..graph.n())
        .into_par_iter()
        .map(|start| {
            let mut rng = stream_rng(cfg.seed ^ start as u64, WALK_STREAM);
            (0..cfg.num_walks)
                .map(|_| {
                    let mut walk = Vec::with_capacity(cfg.walk_length);
                    walk.push(start);
                    while walk.len() < cfg.walk_length {
                        let cur = *walk.last().expect("walk starts non-empty");
                        if graph.neighbors[cur].is_empty() {
                            break;
                        }
                        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
                        let dist = transition_probabilities(graph, prev, cur, cfg.p, cfg.q);
                        walk.push(sample_next(&mut rng, &dist));
                    }
                    walk
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Unigram^0.75 noise table as a cumulative distribution.
fn noise_cdf(walks: &[Vec<usize>], n: usize) -> Vec<f64> {
    let mut counts = vec![0.0f64; n];
    for w in walks {
        for &x in w {
            counts[x] += 1.0;
        }
    }
    let mut acc = 0.0;
    let total: f64 = counts.iter().map(|c| c.powf(0.75)).sum();
    counts
        .iter()
        .map(|c| {
            acc += c.powf(0.75) / total;
            acc
        })
        .collect()
}

pub fn train_node2vec(taxonomy: &Taxonomy, cfg: &Node2VecConfig) -> Result<NodeEmbeddings, GraphError> {
    cfg.validate()?;
    let graph = NodeGraph::new(taxonomy);
    let n = graph.n();
    let dim = cfg.dim;
    let mut walks = sample_walks(&graph, cfg);
    let mut rng = stream_rng(cfg.seed, TRAIN_STREAM);
    walks.shuffle(&mut rng);

    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0f64; n * dim];
    let cdf = noise_cdf(&walks, n);
    let total_tokens: usize = walks.iter().map(Vec::len).sum::<usize>() * cfg.epochs;
    let mut seen = 0usize;
    let mut grad = vec![0.0f64; dim];

    for _ in 0..cfg.epochs {
        for walk in &walks {
            for (pos, &center) in walk.iter().enumerate() {
                let progress = seen as f64 / total_tokens.max(1) as f64;
                let lr = (cfg.lr_start - (cfg.lr_start - cfg.lr_end) * progress).max(cfg.lr_end);
                seen += 1;
                let reach = rng.random_range(1..=cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(walk.len() - 1);
                for (cpos, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    // context word's input vector predicts the center word
                    let inp = context * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for s in 0..=cfg.negatives {
                        let (target, label) = if s == 0 {
                            (center, 1.0)
                        } else {
                            let r: f64 = rng.random();
                            let t = cdf.partition_point(|&c| c <= r).min(n - 1);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * dim;
                        let score: f64 = (0..dim).map(|k| input[inp + k] * output[out + k]).sum();
                        let g = (label - sigmoid(score)) * lr;
                        for k in 0..dim {
                            grad[k] += g * output[out + k];
                            output[out + k] += g * input[inp + k];
                        }
                    }
                    for k in 0..dim {
                        input[inp + k] += grad[k];
                    }
                }
            }
        }
    }
    NodeEmbeddings::from_graph(Method::Node2vec, Geometry::Euclidean, &graph, dim, |i| {
        input[i * dim..(i + 1) * dim].to_vec()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cosine;
    use crate::taxonomy::{synset, Pos};

    fn path3() -> Taxonomy {
        Taxonomy::from_synsets(vec![
            synset("a", Pos::Noun, &["a"], &[]),
            synset("b", Pos::Noun, &["b"], &["a"]),
            synset("c", Pos::Noun, &["c"], &["b"]),
        ])
        .unwrap()
    }

    #[test]
    fn unbiased_walk_is_uniform() {
        let g = NodeGraph::new(&path3());
        let dist = transition_probabilities(&g, Some(0), 1, 1.0, 1.0);
        assert_eq!(dist, vec![(0, 0.5), (2, 0.5)]);
    }

    #[test]
    fn small_q_pushes_outward() {
        let g = NodeGraph::new(&path3());
        let q = 1e-9;
        let dist = transition_probabilities(&g, Some(0), 1, 1.0, q);
        // weights {1/p, 1/q} normalized
        let expect_c = (1.0 / q) / (1.0 + 1.0 / q);
        assert!((dist[1].1 - expect_c).abs() < 1e-12);
        assert!(dist[1].1 > 0.999_999);
    }

    #[test]
    fn isolated_node_has_trivial_walks() {
        let t = Taxonomy::from_synsets(vec![synset("solo", Pos::Noun, &["solo"], &[])]).unwrap();
        let cfg = Node2VecConfig {
            dim: 8,
            num_walks: 3,
            walk_length: 5,
            epochs: 1,
            ..Default::default()
        };
        let g = NodeGraph::new(&t);
        assert_eq!(sample_walks(&g, &cfg), vec![vec![0]; 3]);
        let emb = train_node2vec(&t, &cfg).unwrap();
        assert!(emb.get("solo").unwrap().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = Node2VecConfig { p: 0.0, ..Default::default() };
        assert!(matches!(train_node2vec(&path3(), &cfg), Err(GraphError::Config(_))));
    }

    #[test]
    fn neighbours_end_up_closer_and_training_is_deterministic() {
        let t = crate::graph::test_support::binary_tree(15);
        let cfg = Node2VecConfig {
            dim: 16,
            num_walks: 20,
            walk_length: 10,
            window: 3,
            epochs: 3,
            seed: 7,
            ..Default::default()
        };
        let a = train_node2vec(&t, &cfg).unwrap();
        let b = train_node2vec(&t, &cfg).unwrap();
        assert_eq!(a, b);
        // b07 and b08 are siblings under b03; b14 sits in the other subtree
        let sib = cosine(a.get("b07").unwrap(), a.get("b08").unwrap());
        let far = cosine(a.get("b07").unwrap(), a.get("b14").unwrap());
        assert!(sib > far, "sibling {sib} vs distant {far}");
    }
}
