//! Dense row-major matrices and the few factorizations the detectors need.

// Index loops follow the textbook statements of these algorithms.
#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix storage",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally sized rows. An empty slice yields a
    /// `0 x cols` matrix only through [`Matrix::zeros`]; here it is `0 x 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Returns the rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Position and value of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols.max(1), i % self.cols.max(1)))
    }

    /// `x^T M` for a row vector `x` of length `rows`, accumulated over rows in
    /// index order.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (k, &xk) in x.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(k)) {
                *o += xk * w;
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Lower Cholesky factor `L` with `A = L L^T`.
///
/// Fails with [`Error::SingularCovariance`] when a pivot is not safely
/// positive relative to the largest diagonal entry.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            what: "cholesky input",
            expected: n,
            found: a.cols(),
        });
    }
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let floor = f64::EPSILON * (n as f64) * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l.get(j, k) * l.get(j, k);
        }
        if !(pivot > floor) || !pivot.is_finite() {
            return Err(Error::SingularCovariance);
        }
        let ljj = libm::sqrt(pivot);
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
/// The result is symmetrized exactly.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let n = l.rows();
    // Solve L Y = I, then L^T X = Y, column by column.
    let mut inv = Matrix::zeros(n, n);
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.get(k, i) * inv.get(k, col);
            }
            inv.set(i, col, s / l.get(i, i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, m);
            inv.set(j, i, m);
        }
    }
    Ok(inv)
}

/// Upper-triangular factor `R` (`min(n, d) x d`) of a Householder QR of `a`.
///
/// `a` and `R` share right singular vectors and singular values, so an SVD of
/// the small factor replaces one of the tall input.
pub fn householder_r(a: &Matrix) -> Matrix {
    let (n, d) = (a.rows(), a.cols());
    let mut w = a.clone();
    let steps = n.min(d);
    let mut v = vec![0.0; n];
    for k in 0..steps {
        let mut norm_sq = 0.0;
        for i in k..n {
            norm_sq += w.get(i, k) * w.get(i, k);
        }
        let norm = libm::sqrt(norm_sq);
        if norm == 0.0 {
            continue;
        }
        let x0 = w.get(k, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = w.get(i, k);
        }
        v[k] -= alpha;
        let v_norm_sq: f64 = v[k..n].iter().map(|x| x * x).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        for j in k..d {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * w.get(i, j);
            }
            let f = 2.0 * s / v_norm_sq;
            for i in k..n {
                let cur = w.get(i, j);
                w.set(i, j, cur - f * v[i]);
            }
        }
        for i in (k + 1)..n {
            w.set(i, k, 0.0);
        }
    }
    let mut r = Matrix::zeros(steps, d);
    for i in 0..steps {
        for j in i..d {
            r.set(i, j, w.get(i, j));
        }
    }
    r
}

/// Singular values and right singular vectors of a matrix.
#[derive(Debug, Clone)]
pub struct RightSvd {
    /// Singular values, unsorted, one per input column.
    pub singular_values: Vec<f64>,
    /// `d x d` orthogonal matrix; column `j` pairs with `singular_values[j]`.
    pub v: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD returning singular values and right
/// singular vectors. Tall inputs are first reduced with a Householder QR.
///
/// Rotation order is fixed, so identical inputs give bit-identical outputs.
pub fn right_svd(a: &Matrix) -> RightSvd {
    let reduced;
    let m = if a.rows() > a.cols() {
        reduced = householder_r(a);
        &reduced
    } else {
        a
    };
    let d = m.cols();
    let len = m.rows();
    // Column-major working copy: cols[j] is column j of `m`.
    let mt = m.transpose();
    let mut cols: Vec<Vec<f64>> = mt.row_iter().map(|r| r.to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s, len);
                rotate(&mut v, p, q, c, s, d);
            }
        }
        if !rotated {
            break;
        }
    }

    let singular_values = cols.iter().map(|c| norm2(c)).collect();
    let mut vm = Matrix::zeros(d, d);
    for (j, col) in v.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            vm.set(i, j, x);
        }
    }
    RightSvd { singular_values, v: vm }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64, len: usize) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for i in 0..len {
        let x = cp[i];
        let y = cq[i];
        cp[i] = c * x - s * y;
        cq[i] = s * x + c * y;
    }
}
