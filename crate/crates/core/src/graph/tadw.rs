//! Text-associated DeepWalk as a regularized matrix factorization
//! `M ≈ Wᵀ H T`, solved by exact alternating ridge steps.

use nalgebra::DMatrix;
use rand::Rng;

use super::{config_check, feature_matrix, stream_rng, GraphError, Method, NodeEmbeddings, NodeGraph};
use crate::geometry::Geometry;
use crate::linalg::{symmetric_eigen, top_right_singular};
use crate::taxonomy::Taxonomy;
use crate::vectors::SynsetIndex;

const INIT_STREAM: u64 = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct TadwConfig {
    pub dim: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub text_dim: usize,
    pub seed: u64,
}

impl Default for TadwConfig {
    fn default() -> Self {
        TadwConfig {
            dim: 80,
            lambda: 0.2,
            iterations: 20,
            text_dim: 200,
            seed: 0,
        }
    }
}

impl TadwConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        config_check(self.dim > 0, "tadw dim must be positive")?;
        config_check(self.lambda > 0.0 && self.lambda.is_finite(), "lambda must be positive")?;
        config_check(self.iterations > 0, "iterations must be positive")?;
        config_check(self.text_dim > 0, "text_dim must be positive")
    }
}

/// `(S + S²)/2` with `S` the row-normalized undirected adjacency.
pub fn proximity_matrix(graph: &NodeGraph) -> DMatrix<f64> {
    let n = graph.n();
    let mut s = DMatrix::zeros(n, n);
    for (i, nb) in graph.neighbors.iter().enumerate() {
        let w = 1.0 / nb.len().max(1) as f64;
        for &j in nb {
            s[(i, j)] = w;
        }
    }
    let s2 = &s * &s;
    (s + s2) * 0.5
}

/// Text matrix `T` (`text_dim × n`) with unit-norm columns; features wider
/// than `text_dim` are reduced by truncated SVD first.
pub fn text_matrix(x: &DMatrix<f64>, text_dim: usize) -> DMatrix<f64> {
    let reduced = if x.ncols() > text_dim {
        let (_, v) = top_right_singular(x, text_dim);
        x * v
    } else {
        x.clone()
    };
    let mut t = reduced.transpose();
    for mut col in t.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    t
}

pub fn objective(m: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = m - w.transpose() * h * t;
    r.norm_squared() + lambda / 2.0 * (w.norm_squared() + h.norm_squared())
}

/// Minimize over `W` with `H` fixed.
fn w_step(m: &DMatrix<f64>, h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>, GraphError> {
    let b = h * t;
    let k = b.nrows();
    let gram = &b * b.transpose() + DMatrix::identity(k, k) * (lambda / 2.0);
    let chol = gram
        .cholesky()
        .ok_or_else(|| GraphError::SingularSolve("W-step normal equations".into()))?;
    // W = (BBᵀ + λ/2 I)⁻¹ B Mᵀ, the transpose of M Bᵀ (BBᵀ + λ/2 I)⁻¹
    Ok(chol.solve(&(&b * m.transpose())))
}

/// Minimize over `H` with `W` fixed: solves `A H C + λ/2 H = W M Tᵀ` in the
/// joint eigenbasis of `A = WWᵀ` and `C = TTᵀ`.
fn h_step(m: &DMatrix<f64>, w: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let (la, p) = symmetric_eigen(&(w * w.transpose()));
    let (lc, q) = symmetric_eigen(&(t * t.transpose()));
    let d = w * m * t.transpose();
    let mut ht = p.transpose() * d * &q;
    for i in 0..ht.nrows() {
        for j in 0..ht.ncols() {
            ht[(i, j)] /= la[i] * lc[j] + lambda / 2.0;
        }
    }
    p * ht * q.transpose()
}

/// Train and also return the objective after initialization and after every
/// half-step.
pub fn train_tadw_with_history(
    taxonomy: &Taxonomy,
    features: &SynsetIndex,
    cfg: &TadwConfig,
) -> Result<(NodeEmbeddings, Vec<f64>), GraphError> {
    cfg.validate()?;
    let graph = NodeGraph::new(taxonomy);
    let m = proximity_matrix(&graph);
    let t = text_matrix(&feature_matrix(&graph, features)?, cfg.text_dim);
    let n = graph.n();
    let mut rng = stream_rng(cfg.seed, INIT_STREAM);
    let mut w = DMatrix::from_fn(cfg.dim, n, |_, _| rng.random_range(-0.1..0.1));
    let mut h = DMatrix::from_fn(cfg.dim, t.nrows(), |_, _| rng.random_range(-0.1..0.1));
    let mut history = vec![objective(&m, &w, &h, &t, cfg.lambda)];
    for step in 0..cfg.iterations {
        w = w_step(&m, &h, &t, cfg.lambda)?;
        history.push(objective(&m, &w, &h, &t, cfg.lambda));
        h = h_step(&m, &w, &t, cfg.lambda);
        let obj = objective(&m, &w, &h, &t, cfg.lambda);
        if !obj.is_finite() {
            return Err(GraphError::NonFiniteLoss(step));
        }
        history.push(obj);
    }
    let emb = NodeEmbeddings::from_graph(Method::Tadw, Geometry::Euclidean, &graph, cfg.dim, |i| {
        w.column(i).iter().copied().collect()
    })?;
    Ok((emb, history))
}

pub fn train_tadw(taxonomy: &Taxonomy, features: &SynsetIndex, cfg: &TadwConfig) -> Result<NodeEmbeddings, GraphError> {
    train_tadw_with_history(taxonomy, features, cfg).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_support::binary_tree;
    use crate::taxonomy::{synset, Pos};

    fn random_features(t: &Taxonomy, dim: usize, seed: u64) -> SynsetIndex {
        let mut rng = stream_rng(seed, 0);
        let rows = t
            .ids()
            .map(|id| (id.to_string(), (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        SynsetIndex::from_rows(Geometry::Euclidean, dim, rows)
    }

    #[test]
    fn two_node_proximity() {
        let t = Taxonomy::from_synsets(vec![
            synset("a", Pos::Noun, &["a"], &[]),
            synset("b", Pos::Noun, &["b"], &["a"]),
        ])
        .unwrap();
        let m = proximity_matrix(&NodeGraph::new(&t));
        assert_eq!(m, DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn text_columns_are_unit_and_reduced() {
        let x = DMatrix::from_fn(6, 10, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let t = text_matrix(&x, 4);
        assert_eq!(t.shape(), (4, 6));
        for c in t.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_never_increases() {
        let t = binary_tree(20);
        let f = random_features(&t, 12, 5);
        let cfg = TadwConfig { dim: 6, text_dim: 8, iterations: 10, seed: 2, ..Default::default() };
        let (_, hist) = train_tadw_with_history(&t, &f, &cfg).unwrap();
        for pair in hist.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-10), "{hist:?}");
        }
    }

    #[test]
    fn huge_lambda_collapses_to_zero() {
        let t = binary_tree(7);
        let f = random_features(&t, 5, 1);
        let cfg = TadwConfig { dim: 4, lambda: 1e12, iterations: 3, ..Default::default() };
        let (emb, hist) = train_tadw_with_history(&t, &f, &cfg).unwrap();
        let m = proximity_matrix(&NodeGraph::new(&t));
        assert!((hist.last().unwrap() - m.norm_squared()).abs() < 1e-6);
        for id in t.ids() {
            assert!(emb.get(id).unwrap().iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn missing_features_are_reported() {
        let t = binary_tree(3);
        let f = SynsetIndex::from_rows(Geometry::Euclidean, 2, vec![("b00".into(), vec![1.0, 0.0])]);
        assert!(matches!(
            train_tadw(&t, &f, &TadwConfig::default()),
            Err(GraphError::MissingFeatures(_))
        ));
    }
}
