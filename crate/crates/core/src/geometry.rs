//! Vector geometry shared by every embedding space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point with norm {0} lies outside the open unit ball")]
    OutOfBall(f64),
    #[error("cannot aggregate an empty point set")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

/// Geometry an embedding space lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Euclidean,
    Poincare,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Euclidean => "euclidean",
            Geometry::Poincare => "poincare",
        })
    }
}

impl FromStr for Geometry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Geometry::Euclidean),
            "poincare" => Ok(Geometry::Poincare),
            other => Err(format!("unknown geometry {other:?}")),
        }
    }
}

impl Geometry {
    /// Similarity used for ranking: cosine in Euclidean spaces, negative
    /// hyperbolic distance in the ball. Degenerate inputs give −∞.
    pub fn similarity(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => cosine(a, b),
            Geometry::Poincare => match poincare_distance(a, b) {
                Ok(d) => -d,
                Err(_) => f64::NEG_INFINITY,
            },
        }
    }

    /// Aggregate several points into one representative point.
    pub fn aggregate(self, points: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
        match self {
            Geometry::Euclidean => mean(points),
            Geometry::Poincare => einstein_midpoint(points),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; −∞ when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return f64::NEG_INFINITY;
    }
    dot(a, b) / (na * nb)
}

/// Unit-length copy of `a`; zero vectors are returned unchanged.
pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n > 0.0 {
        a.iter().map(|x| x / n).collect()
    } else {
        a.to_vec()
    }
}

/// Componentwise arithmetic mean.
pub fn mean(points: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let first = points.first().ok_or(GeometryError::Empty)?;
    let mut acc = vec![0.0; first.len()];
    for p in points {
        if p.len() != acc.len() {
            return Err(GeometryError::Dimension(p.len(), acc.len()));
        }
        for (a, x) in acc.iter_mut().zip(p.iter()) {
            *a += x;
        }
    }
    let n = points.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

fn check_in_ball(x: &[f64]) -> Result<f64, GeometryError> {
    let sq = dot(x, x);
    if sq < 1.0 && sq.is_finite() {
        Ok(sq)
    } else {
        Err(GeometryError::OutOfBall(sq.sqrt()))
    }
}

/// Hyperbolic distance in the Poincaré ball:
/// `arcosh(1 + 2‖u−v‖² / ((1−‖u‖²)(1−‖v‖²)))`.
pub fn poincare_distance(u: &[f64], v: &[f64]) -> Result<f64, GeometryError> {
    if u.len() != v.len() {
        return Err(GeometryError::Dimension(u.len(), v.len()));
    }
    let uu = check_in_ball(u)?;
    let vv = check_in_ball(v)?;
    let diff: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    let arg = 1.0 + 2.0 * diff / ((1.0 - uu) * (1.0 - vv));
    Ok(arg.max(1.0).acosh())
}

/// Einstein midpoint of points in the Poincaré ball, computed through the
/// Klein model with Lorentz-factor weights.
pub fn einstein_midpoint(points: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let first = points.first().ok_or(GeometryError::Empty)?;
    let dim = first.len();
    let mut weighted = vec![0.0; dim];
    let mut total = 0.0;
    for p in points {
        if p.len() != dim {
            return Err(GeometryError::Dimension(p.len(), dim));
        }
        let sq = check_in_ball(p)?;
        let scale = 2.0 / (1.0 + sq);
        // ‖k‖² = 4‖x‖²/(1+‖x‖²)², so 1−‖k‖² = ((1−‖x‖²)/(1+‖x‖²))²
        let gamma = (1.0 + sq) / (1.0 - sq);
        for (w, x) in weighted.iter_mut().zip(p.iter()) {
            *w += gamma * scale * x;
        }
        total += gamma;
    }
    let klein: Vec<f64> = weighted.iter().map(|w| w / total).collect();
    let kk = dot(&klein, &klein).min(1.0);
    let back = 1.0 + (1.0 - kk).sqrt();
    Ok(klein.iter().map(|k| k / back).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_closed_forms() {
        assert_eq!(poincare_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        let d = poincare_distance(&[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(
            poincare_distance(&[1.0, 0.0], &[0.0, 0.0]),
            Err(GeometryError::OutOfBall(_))
        ));
    }

    #[test]
    fn midpoint_basics() {
        let p = [0.3, -0.2];
        let m = einstein_midpoint(&[&p]).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12 && (m[1] + 0.2).abs() < 1e-12);
        let q = [-0.3, 0.2];
        let m = einstein_midpoint(&[&p, &q]).unwrap();
        assert!(norm(&m) < 1e-12);
        assert!(einstein_midpoint(&[]).is_err());
        assert!(einstein_midpoint(&[&[1.2, 0.0]]).is_err());
    }

    #[test]
    fn cosine_handles_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), f64::NEG_INFINITY);
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]) - 1.0).abs() < 1e-12);
    }

    fn ball_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, dim).prop_map(|v| {
            let n = norm(&v);
            if n >= 0.95 {
                v.iter().map(|x| x * 0.95 / n).collect()
            } else {
                v
            }
        })
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(u in ball_point(4), v in ball_point(4)) {
            let a = poincare_distance(&u, &v).unwrap();
            let b = poincare_distance(&v, &u).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn midpoint_is_permutation_invariant(pts in proptest::collection::vec(ball_point(3), 1..6)) {
            let fwd: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            let rev: Vec<&[f64]> = pts.iter().rev().map(Vec::as_slice).collect();
            let a = einstein_midpoint(&fwd).unwrap();
            let b = einstein_midpoint(&rev).unwrap();
            prop_assert!(norm(&a) < 1.0);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn self_cosine_is_one(u in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            prop_assume!(norm(&u) > 1e-6);
            prop_assert!((cosine(&u, &u) - 1.0).abs() < 1e-9);
        }
    }
}
