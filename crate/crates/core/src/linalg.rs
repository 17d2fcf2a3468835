//! Small dense linear algebra: vector helpers and an exactly symmetric matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A point, gradient, step or gradient difference in R^n.
pub type DenseVector = Vec<f64>;

/// Relative pivot tolerance used by [`SymMatrix::is_positive_definite`].
pub const PD_PIVOT_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `x + alpha * p`
pub fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> DenseVector {
    x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Dense symmetric `n x n` matrix.
///
/// Storage is full row-major, but every constructor averages the two
/// triangles, so `get(i, j) == get(j, i)` holds bitwise and no public method
/// can break it. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = scale;
        }
        SymMatrix { n, data }
    }

    /// Builds a matrix from an entry function, symmetrizing as `(A + A') / 2`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut raw = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                raw[i * n + j] = f(i, j);
            }
        }
        Self::from_row_major(n, raw)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_row_major(n: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: raw.len() });
        }
        let mut data = raw;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("matrix entry"));
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    /// Outer product `v v'`.
    pub fn outer(v: &[f64]) -> Result<Self> {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, v: &[f64]) -> DenseVector {
        assert_eq!(v.len(), self.n, "matvec dimension mismatch");
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// `v' A v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.matvec(v))
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        Self::from_row_major(self.n, self.data.iter().map(|a| alpha * a).collect())
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        self.check_dim(other.n)?;
        Self::from_row_major(self.n, self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n {
            Err(Error::DimensionMismatch { expected: self.n, got: n })
        } else {
            Ok(())
        }
    }

    /// Lower Cholesky factor (row-major), or `None` if a pivot falls at or
    /// below `tol * max|a_ii|`.
    pub fn cholesky(&self, tol: f64) -> Option<Vec<f64>> {
        let n = self.n;
        let scale = (0..n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return None;
        }
        let floor = tol * scale;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > floor) {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(l)
    }

    /// Positive-definiteness proxy: Cholesky succeeds with pivots above
    /// [`PD_PIVOT_TOL`] relative to the largest diagonal entry.
    pub fn is_positive_definite(&self) -> bool {
        self.cholesky(PD_PIVOT_TOL).is_some()
    }

    /// Inverse of a positive definite matrix through its Cholesky factor.
    pub fn inverse_spd(&self) -> Result<Self> {
        let n = self.n;
        let l = self.cholesky(PD_PIVOT_TOL).ok_or(Error::SingularInput("cholesky failed"))?;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            // L z = e_c
            for i in 0..n {
                let mut sum = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    sum -= l[i * n + k] * col[k];
                }
                col[i] = sum / l[i * n + i];
            }
            // L' x = z
            for i in (0..n).rev() {
                let mut sum = col[i];
                for k in (i + 1)..n {
                    sum -= l[k * n + i] * col[k];
                }
                col[i] = sum / l[i * n + i];
            }
            for i in 0..n {
                inv[i * n + c] = col[i];
            }
        }
        Self::from_row_major(n, inv)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_symmetrizes_exactly() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.1, 3.0]]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert_eq!(m.get(0, 1), 0.5 * (2.0 + 0.1));
        assert!(m.is_symmetric());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn cholesky_detects_indefinite() {
        let pd = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let indef = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(pd.is_positive_definite());
        assert!(!indef.is_positive_definite());
        assert!(!SymMatrix::scaled_identity(3, 0.0).is_positive_definite());
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a =
            SymMatrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]).unwrap();
        let inv = a.inverse_spd().unwrap();
        let prod = a.to_dmatrix() * inv.to_dmatrix();
        let err = (prod - DMatrix::<f64>::identity(3, 3)).amax();
        assert!(err < 1e-14, "{err}");
    }
}
