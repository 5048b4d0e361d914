//! L2-regularized logistic regression on z-scored features, fitted by
//! Newton's method, with the L2 strength picked by grouped cross-validation.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RankerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub l2_grid: Vec<f64>,
    pub folds: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            l2_grid: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
            tolerance: 1e-6,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

/// Labelled feature rows; `groups[i]` identifies the query row `i` came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub groups: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    fn has_both_labels(&self) -> bool {
        self.labels.contains(&1.0) && self.labels.contains(&0.0)
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

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Summed log-loss plus `(λ/2)‖w‖²` (bias unpenalized) and its gradient;
/// the gradient's last entry is the bias component.
pub fn objective(weights: &[f64], bias: f64, rows: &[Vec<f64>], labels: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let d = weights.len();
    let mut grad = vec![0.0; d + 1];
    let mut value = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (x, &y) in rows.iter().zip(labels) {
        let z = x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + bias;
        value += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        grad.iter_mut().zip(x).for_each(|(g, a)| *g += r * a);
        grad[d] += r;
    }
    for j in 0..d {
        grad[j] += l2 * weights[j];
    }
    (value, grad)
}

/// Newton iterations with backtracking until the gradient of the mean
/// objective has norm ≤ `tolerance`.
pub fn fit_logistic(rows: &[Vec<f64>], labels: &[f64], l2: f64, tolerance: f64, max_iterations: usize) -> (Vec<f64>, f64) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..max_iterations {
        let (f, g) = objective(&w, b, rows, labels, l2);
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt() / n;
        if gnorm <= tolerance {
            break;
        }
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for x in rows {
            let z = x.iter().zip(&w).map(|(a, wi)| a * wi).sum::<f64>() + b;
            let s = sigmoid(z);
            let c = s * (1.0 - s);
            for i in 0..=d {
                let xi = if i < d { x[i] } else { 1.0 };
                for j in 0..=i {
                    let xj = if j < d { x[j] } else { 1.0 };
                    h[(i, j)] += c * xi * xj;
                }
            }
        }
        for i in 0..=d {
            if i < d {
                h[(i, i)] += l2;
            }
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        let gv = DVector::from_vec(g.clone());
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&gv),
            None => {
                let jitter = DMatrix::identity(d + 1, d + 1) * 1e-8;
                match (h + jitter).cholesky() {
                    Some(c) => c.solve(&gv),
                    None => gv.clone(),
                }
            }
        };
        let slope: f64 = -g.iter().zip(step.iter()).map(|(a, s)| a * s).sum::<f64>();
        let mut t = 1.0;
        loop {
            let w2: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, s)| wi - t * s).collect();
            let b2 = b - t * step[d];
            let (f2, _) = objective(&w2, b2, rows, labels, l2);
            if f2 <= f + 1e-4 * t * slope || t < 1e-12 {
                w = w2;
                b = b2;
                break;
            }
            t *= 0.5;
        }
    }
    (w, b)
}

/// Per-feature mean and std; zero-variance features get std 1.
fn fit_scaling(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for r in rows {
        means.iter_mut().zip(r).for_each(|(m, x)| *m += x / n);
    }
    let mut vars = vec![0.0; d];
    for r in rows {
        vars.iter_mut()
            .zip(r.iter().zip(&means))
            .for_each(|(v, (x, m))| *v += (x - m) * (x - m) / n);
    }
    let stds = vars
        .into_iter()
        .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
        .collect();
    (means, stds)
}

/// A fitted scorer over a named feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranker {
    pub schema: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub l2: f64,
    /// Mean held-out log-loss per candidate L2 strength, in grid order.
    #[serde(default)]
    pub cv_loss: Vec<(f64, f64)>,
}

impl Ranker {
    fn fit(schema: &[String], data: &Dataset, l2: f64, cfg: &RankerConfig) -> Ranker {
        let (means, stds) = fit_scaling(&data.rows);
        let scaled: Vec<Vec<f64>> = data.rows.iter().map(|r| scale(r, &means, &stds)).collect();
        let (mut weights, bias) = fit_logistic(&scaled, &data.labels, l2, cfg.tolerance, cfg.max_iterations);
        for (j, w) in weights.iter_mut().enumerate() {
            if scaled.iter().all(|r| r[j] == 0.0) {
                *w = 0.0;
            }
        }
        Ranker {
            schema: schema.to_vec(),
            weights,
            bias,
            means,
            stds,
            l2,
            cv_loss: Vec::new(),
        }
    }

    pub fn check_schema(&self, width: usize) -> Result<(), RankerError> {
        if width != self.schema.len() {
            return Err(RankerError::SchemaMismatch {
                expected: self.schema.len(),
                found: width,
            });
        }
        Ok(())
    }

    /// Probability that the row is a true hypernym.
    pub fn score(&self, row: &[f64]) -> Result<f64, RankerError> {
        self.check_schema(row.len())?;
        let z: f64 = scale(row, &self.means, &self.stds)
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.bias;
        Ok(sigmoid(z))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), RankerError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| RankerError::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RankerError> {
        let text = std::fs::read_to_string(path)?;
        let r: Ranker = serde_json::from_str(&text).map_err(|e| RankerError::Format(e.to_string()))?;
        if r.weights.len() != r.schema.len() || r.means.len() != r.schema.len() || r.stds.len() != r.schema.len() {
            return Err(RankerError::Format("ranker vectors do not match its schema".into()));
        }
        Ok(r)
    }
}

fn scale(row: &[f64], means: &[f64], stds: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(means.iter().zip(stds))
        .map(|(x, (m, s))| (x - m) / s)
        .collect()
}

/// Fold index of every row: by query group when there are enough groups,
/// otherwise by row.
fn assign_folds(data: &Dataset, folds: usize, seed: u64) -> (Vec<usize>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<usize> = {
        let mut g: Vec<usize> = data.groups.clone();
        g.sort_unstable();
        g.dedup();
        g
    };
    if groups.len() >= folds {
        let mut order = groups;
        order.shuffle(&mut rng);
        let fold_of: BTreeMap<usize, usize> = order.iter().enumerate().map(|(p, &g)| (g, p % folds)).collect();
        (data.groups.iter().map(|g| fold_of[g]).collect(), folds)
    } else {
        let k = folds.min(data.len());
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut out = vec![0; data.len()];
        for (p, &i) in order.iter().enumerate() {
            out[i] = p % k;
        }
        (out, k)
    }
}

fn log_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn train_ranker(schema: &[String], data: &Dataset, cfg: &RankerConfig) -> Result<Ranker, RankerError> {
    if data.is_empty() {
        return Err(RankerError::InsufficientData("no training rows".into()));
    }
    if !data.has_both_labels() {
        return Err(RankerError::DegenerateData);
    }
    for row in &data.rows {
        if row.len() != schema.len() {
            return Err(RankerError::SchemaMismatch {
                expected: schema.len(),
                found: row.len(),
            });
        }
    }
    if cfg.l2_grid.is_empty() || cfg.l2_grid.iter().any(|l| *l <= 0.0) {
        return Err(RankerError::InsufficientData("L2 grid must hold positive values".into()));
    }
    let (fold_of, k) = assign_folds(data, cfg.folds.max(2), cfg.seed);
    let mut cv_loss = Vec::with_capacity(cfg.l2_grid.len());
    for &l2 in &cfg.l2_grid {
        let mut total = 0.0;
        let mut count = 0usize;
        for fold in 0..k {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] == fold).collect();
            let train = data.subset(&train_idx);
            if test_idx.is_empty() || !train.has_both_labels() {
                continue;
            }
            let model = Ranker::fit(schema, &train, l2, cfg);
            for &i in &test_idx {
                total += log_loss(model.score(&data.rows[i])?, data.labels[i]);
                count += 1;
            }
        }
        let mean = if count > 0 { total / count as f64 } else { f64::INFINITY };
        log::debug!("l2 {l2}: cv log-loss {mean}");
        cv_loss.push((l2, mean));
    }
    let mut best = cv_loss[0];
    for &c in &cv_loss[1..] {
        if c.1 < best.1 {
            best = c;
        }
    }
    // with no usable fold every loss is infinite; fall back to the middle of the grid
    let chosen = if best.1.is_finite() {
        best.0
    } else {
        cfg.l2_grid[cfg.l2_grid.len() / 2]
    };
    log::info!("ranker: {} rows, l2 = {chosen}", data.len());
    let mut ranker = Ranker::fit(schema, data, chosen, cfg);
    ranker.cv_loss = cv_loss;
    Ok(ranker)
}
