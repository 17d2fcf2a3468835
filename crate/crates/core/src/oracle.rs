//! Brute-force ground truth for the SP-BFGS update.
//!
//! The penalized matrix-nearness problem
//!
//! ```text
//! min_X  1/2 ||W^{1/2} (X - H) W^{1/2}||_F^2 + beta/2 ||W^{1/2} (X y - s)||_2^2,  X = X'
//! ```
//!
//! is a linear least-squares problem in the `n(n+1)/2` free entries of `X`.
//! This module assembles the stacked residual entry by entry and solves it
//! with a dense SVD. Nothing here touches the closed-form update.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SymMatrix};
use crate::update::CurvaturePair;

/// A weight matrix with `W s = y`:
/// `W = y y' / (y's) + c (I - s s' / (s's))`.
pub fn make_weight_matrix(pair: &CurvaturePair, c: f64) -> Result<SymMatrix> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("weight scale c must be > 0, got {c}")));
    }
    if !(pair.sty() > 0.0) {
        return Err(Error::DegenerateInput("weight matrix needs s'y > 0"));
    }
    let s = pair.s();
    let y = pair.y();
    let ss = dot(s, s);
    if ss == 0.0 || norm2(s) == 0.0 {
        return Err(Error::DegenerateInput("weight matrix needs s != 0"));
    }
    let sty = pair.sty();
    SymMatrix::from_fn(pair.dim(), |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        y[i] * y[j] / sty + c * (id - s[i] * s[j] / ss)
    })
}

/// Index pairs `(i, j)` with `i <= j`; one unknown per pair.
fn upper_triangle(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// Symmetric basis matrix: `e_i e_j' + e_j e_i'` off the diagonal, `e_i e_i'` on it.
fn basis(n: usize, (i, j): (usize, usize)) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Numerically minimizes the penalized nearness objective over symmetric
/// matrices. `beta` must be finite and positive; `w` must be SPD with
/// `W s = y`.
pub fn oracle_penalized_qp(
    h: &SymMatrix,
    pair: &CurvaturePair,
    beta: f64,
    w: &SymMatrix,
) -> Result<SymMatrix> {
    let n = h.dim();
    h.check_dim(pair.dim())?;
    w.check_dim(n)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("oracle beta must be finite and > 0, got {beta}")));
    }
    let wm = w.to_dmatrix();
    let eig = wm.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParameter("weight matrix must be positive definite".into()));
    }
    let sqrt_l = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let r = &eig.eigenvectors * sqrt_l * eig.eigenvectors.transpose();
    let hm = h.to_dmatrix();
    let y = DVector::from_column_slice(pair.y());
    let s = DVector::from_column_slice(pair.s());

    // Stacked residual: vec(R (X - H) R) over n^2 rows, then
    // sqrt(beta) R (X y - s) over n rows, linear in the free entries.
    let idx = upper_triangle(n);
    let m = idx.len();
    let sb = beta.sqrt();
    let mut a = DMatrix::zeros(n * n + n, m);
    for (q, &pq) in idx.iter().enumerate() {
        let e = basis(n, pq);
        let rer = &r * &e * &r;
        let rey = &r * (&e * &y) * sb;
        for i in 0..n {
            for j in 0..n {
                a[(i * n + j, q)] = rer[(i, j)];
            }
            a[(n * n + i, q)] = rey[i];
        }
    }
    let rhr = &r * &hm * &r;
    let rs = &r * &s * sb;
    let mut b = DVector::zeros(n * n + n);
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = rhr[(i, j)];
        }
        b[n * n + i] = rs[i];
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::SingularSystem);
    }
    let theta = svd.solve(&b, 0.0).map_err(|_| Error::SingularSystem)?;

    let mut out = vec![0.0; n * n];
    for (p, &(i, j)) in idx.iter().enumerate() {
        out[i * n + j] = theta[p];
        out[j * n + i] = theta[p];
    }
    SymMatrix::from_row_major(n, out)
}
