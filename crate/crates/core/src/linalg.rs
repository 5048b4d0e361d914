//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Top-`rank` singular values (descending) and right singular vectors
/// (as columns) of `m`.
///
/// Signs are canonicalized so that the largest-magnitude entry of each
/// singular vector is positive, which makes results reproducible.
pub fn top_right_singular(m: &DMatrix<f64>, rank: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let full = rows.min(cols);
    let rank = rank.min(full);
    if rank == 0 {
        return (Vec::new(), DMatrix::zeros(cols, 0));
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let mut sigma = Vec::with_capacity(rank);
    let mut v = DMatrix::zeros(cols, rank);
    for (out, &k) in order.iter().take(rank).enumerate() {
        sigma.push(svd.singular_values[k]);
        let row = v_t.row(k);
        let flip = sign_of_largest(row.iter().copied());
        for c in 0..cols {
            v[(c, out)] = flip * row[c];
        }
    }
    (sigma, v)
}

fn sign_of_largest<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut best = 0.0f64;
    for x in values {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Eigendecomposition of a symmetric matrix; eigenvalues in any order.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Sparse row-major matrix as adjacency lists of `(column, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `self * dense`.
    pub fn mul(&self, dense: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows.len(), dense.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                for c in 0..dense.ncols() {
                    out[(i, c)] += a * dense[(j, c)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                out[(i, j)] += a;
            }
        }
        out
    }
}
