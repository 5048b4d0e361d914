//! HOPE: truncated SVD of the Katz proximity of the directed
//! child→parent graph.

use nalgebra::DMatrix;

use super::{config_check, GraphError, Method, NodeEmbeddings, NodeGraph};
use crate::geometry::Geometry;
use crate::linalg::top_right_singular;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq)]
pub struct HopeConfig {
    pub max_rank: usize,
    /// β = `beta_scale` / ρ̂(A).
    pub beta_scale: f64,
    pub power_iterations: usize,
}

impl Default for HopeConfig {
    fn default() -> Self {
        HopeConfig {
            max_rank: 128,
            beta_scale: 0.5,
            power_iterations: 100,
        }
    }
}

impl HopeConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        config_check(self.max_rank > 0, "rank must be positive")?;
        config_check(
            self.beta_scale > 0.0 && self.beta_scale < 1.0,
            "beta scale must lie in (0, 1)",
        )?;
        config_check(self.power_iterations > 0, "power iterations must be positive")
    }

    pub fn rank(&self, n: usize) -> usize {
        self.max_rank.min(n.saturating_sub(1)).max(1)
    }
}

/// `A[child, parent] = 1`.
pub fn adjacency(graph: &NodeGraph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(graph.n(), graph.n());
    for &(c, p) in &graph.edges {
        a[(c, p)] = 1.0;
    }
    a
}

/// Power-iteration estimate of the spectral radius, floored at 1.
pub fn spectral_radius(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut x = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut rho = 0.0;
    for _ in 0..iterations {
        let y = a * &x;
        rho = y.norm();
        if rho == 0.0 {
            break;
        }
        x = y / rho;
    }
    rho.max(1.0)
}

/// Closed-form Katz matrix `(I − βA)⁻¹ βA`.
pub fn katz_matrix(a: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>, GraphError> {
    let n = a.nrows();
    let lhs = DMatrix::identity(n, n) - a * beta;
    lhs.lu()
        .solve(&(a * beta))
        .ok_or_else(|| GraphError::SingularSolve("I − βA".into()))
}

/// `Σ_{l=1..terms} β^l A^l`.
pub fn katz_series(a: &DMatrix<f64>, beta: f64, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::zeros(n, n);
    let mut power = DMatrix::identity(n, n);
    for _ in 0..terms {
        power = power * a * beta;
        sum += &power;
    }
    sum
}

/// Source embeddings `U√Σ` from a proximity matrix.
pub fn source_embeddings(s: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let (sigma, v) = top_right_singular(s, rank);
    let mut us = s * &v;
    for (k, sv) in sigma.iter().enumerate() {
        let scale = if *sv > 0.0 { 1.0 / sv.sqrt() } else { 0.0 };
        us.column_mut(k).scale_mut(scale);
    }
    // top_right_singular clamps to the matrix rank; pad to the requested width
    let mut out = DMatrix::zeros(s.nrows(), rank);
    out.columns_mut(0, us.ncols()).copy_from(&us);
    out
}

pub fn train_hope(taxonomy: &Taxonomy, cfg: &HopeConfig) -> Result<NodeEmbeddings, GraphError> {
    cfg.validate()?;
    let graph = NodeGraph::new(taxonomy);
    let a = adjacency(&graph);
    let beta = cfg.beta_scale / spectral_radius(&a, cfg.power_iterations);
    let s = katz_matrix(&a, beta)?;
    let rank = cfg.rank(graph.n());
    let emb = source_embeddings(&s, rank);
    NodeEmbeddings::from_graph(Method::Hope, Geometry::Euclidean, &graph, rank, |i| {
        emb.row(i).iter().copied().collect()
    })
}
