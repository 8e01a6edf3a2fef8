//! Small dense matrices and the Moore-Penrose pseudo-inverse built on a
//! full-rank Cholesky factorization of `A^T A`.
//!
//! With `L` (`k x r`) such that `A^T A = L L^T` and `R = (L^T L)^{-1}`, the
//! pseudo-inverse is `L R R L^T A^T`. Rank deficiency is handled inside the
//! factorization: columns whose residual pivot drops below
//! [`RANK_TOLERANCE`] times the largest diagonal entry of `A^T A` are
//! skipped, so `L` only keeps `r` columns.

use super::StatsError;

/// Relative pivot threshold for dropping dependent columns.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-major square-or-rectangular matrix. Conditioning sets are small
/// (a few dozen entries at most), so nothing here is blocked or vectorised.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self^T * self` without forming the transpose.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..self.rows {
                    s += self[(k, i)] * self[(k, j)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * v` for a vector of length `cols`.
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Full-rank Cholesky factor of a symmetric positive semidefinite matrix:
/// returns `L` (`n x r`) with `L L^T = g`, dropping dependent columns.
pub fn full_rank_cholesky(g: &Matrix) -> Matrix {
    let n = g.rows();
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(g[(i, i)]));
    let tol = RANK_TOLERANCE * max_diag;
    // Column-major scratch; only the first `r` columns survive.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut col = vec![0.0; n];
        for (i, c) in col.iter_mut().enumerate().skip(k) {
            let mut s = g[(i, k)];
            for prev in &cols {
                s -= prev[i] * prev[k];
            }
            *c = s;
        }
        let pivot = col[k];
        if pivot > tol && pivot > 0.0 {
            let root = pivot.sqrt();
            col[k] = root;
            for c in col.iter_mut().skip(k + 1) {
                *c /= root;
            }
            cols.push(col);
        }
    }
    Matrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Inverse of a symmetric positive definite matrix by Gauss-Jordan
/// elimination with partial pivoting.
pub fn invert(a: &Matrix) -> Result<Matrix, StatsError> {
    let n = a.rows();
    let mut work = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&x, &y| work[(x, col)].abs().total_cmp(&work[(y, col)].abs())).unwrap_or(col);
        let pivot = work[(pivot_row, col)];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(StatsError::Singular);
        }
        if pivot_row != col {
            for j in 0..n {
                work.data.swap(col * n + j, pivot_row * n + j);
                inv.data.swap(col * n + j, pivot_row * n + j);
            }
        }
        let scale = 1.0 / pivot;
        for j in 0..n {
            work[(col, j)] *= scale;
            inv[(col, j)] *= scale;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work.data[r * n + j] -= f * work.data[col * n + j];
                inv.data[r * n + j] -= f * inv.data[col * n + j];
            }
        }
    }
    Ok(inv)
}

/// Moore-Penrose pseudo-inverse of a square matrix.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix, StatsError> {
    if m.rows() != m.cols() {
        return Err(StatsError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    if !m.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let n = m.rows();
    let l = full_rank_cholesky(&m.gram());
    if l.cols() == 0 {
        // Zero matrix: its pseudo-inverse is zero.
        return Ok(Matrix::zeros(n, n));
    }
    let r = invert(&l.gram())?;
    let lr = l.mul(&r);
    let lrr = lr.mul(&r);
    let lt_mt = l.transpose().mul(&m.transpose());
    Ok(lrr.mul(&lt_mt))
}
