//! Small dense/sparse matrix toolkit: row-major dense storage, a row-list sparse
//! matrix, and Householder QR with column pivoting for null-space extraction.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math;

/// Row-major dense matrix.
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| math::dot(self.row(i), x)).collect()
    }

    /// `y = Aᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    /// `xᵀ A x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        math::dot(x, &self.mul_vec(x))
    }

    pub fn max_abs(&self) -> f64 {
        math::norm_inf(&self.data)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Sparse matrix stored as one `(column, value)` list per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(cols: usize) -> Self {
        Self { cols, rows: Vec::new() }
    }

    pub fn push_row(&mut self, mut entries: Vec<(usize, f64)>) {
        debug_assert!(entries.iter().all(|&(c, _)| c < self.cols));
        entries.sort_by_key(|&(c, _)| c);
        self.rows.push(entries);
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Dense product `S · D`.
    pub fn mul_dense(&self, d: &Matrix) -> Matrix {
        assert_eq!(self.cols, d.rows());
        let mut out = Matrix::zeros(self.rows.len(), d.cols());
        for (i, r) in self.rows.iter().enumerate() {
            let orow = out.row_mut(i);
            for &(k, a) in r {
                for (o, &b) in orow.iter_mut().zip(d.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Householder QR with column pivoting of a tall-or-wide dense matrix `A` (m × n):
/// `A P = Q R`. Only the pieces needed for null-space work are kept.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    m: usize,
    /// Householder vectors `v_k` (length m, zero above k) with `H_k = I − τ_k v_k v_kᵀ`.
    reflectors: Vec<(Vec<f64>, f64)>,
    r_diag: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    /// Factorizes the matrix whose columns are given (each of length `m`).
    pub fn factor_columns(m: usize, mut cols: Vec<Vec<f64>>) -> Self {
        let n = cols.len();
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(steps);
        let mut r_diag = Vec::with_capacity(steps);
        let mut norms: Vec<f64> = cols.iter().map(|c| math::dot(c, c)).collect();
        for k in 0..steps {
            let mut best = k;
            for j in k + 1..n {
                if norms[j] > norms[best] {
                    best = j;
                }
            }
            cols.swap(k, best);
            norms.swap(k, best);
            perm.swap(k, best);

            let x = &cols[k][k..];
            let alpha = math::sqrt(math::dot(x, x));
            if alpha == 0.0 {
                r_diag.push(0.0);
                reflectors.push((vec![0.0; m], 0.0));
                continue;
            }
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut v = vec![0.0; m];
            v[k..].copy_from_slice(x);
            v[k] += sign * alpha;
            let vnorm2 = math::dot(&v[k..], &v[k..]);
            let tau = 2.0 / vnorm2;
            r_diag.push(-sign * alpha);
            for col in cols.iter_mut().skip(k) {
                let s = tau * math::dot(&v[k..], &col[k..]);
                for (c, vi) in col[k..].iter_mut().zip(&v[k..]) {
                    *c -= s * vi;
                }
            }
            for j in k + 1..n {
                let tail = &cols[j][k + 1..];
                norms[j] = math::dot(tail, tail);
            }
            reflectors.push((v, tau));
        }
        Self { m, reflectors, r_diag, perm }
    }

    pub fn r_diagonal(&self) -> &[f64] {
        &self.r_diag
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Numerical rank with threshold `m · ε · max|R_kk|`.
    pub fn rank(&self) -> usize {
        let max = self.r_diag.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if max == 0.0 {
            return 0;
        }
        let tol = self.m as f64 * f64::EPSILON * max;
        // pivoting makes |R_kk| nonincreasing up to rounding
        self.r_diag.iter().take_while(|d| d.abs() > tol).count()
    }

    /// Columns `from..m` of the orthogonal factor `Q`, as an m × (m − from) matrix.
    pub fn q_columns_from(&self, from: usize) -> Matrix {
        let m = self.m;
        let width = m - from;
        let mut out = Matrix::zeros(m, width);
        let mut e = vec![0.0; m];
        for (c, j) in (from..m).enumerate() {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            for (v, tau) in self.reflectors.iter().rev() {
                if *tau == 0.0 {
                    continue;
                }
                let s = tau * math::dot(v, &e);
                if s != 0.0 {
                    for (ei, vi) in e.iter_mut().zip(v) {
                        *ei -= s * vi;
                    }
                }
            }
            for i in 0..m {
                out[(i, c)] = e[i];
            }
        }
        out
    }
}

/// Lower Cholesky factor `L` of a symmetric positive definite matrix, `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes `a + τI`, doubling `τ` from `jitter · mean(diag)` until the
    /// factorization succeeds.
    pub fn factor_with_jitter(a: &Matrix, jitter: f64) -> Self {
        let n = a.rows();
        let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
        let mut tau = jitter * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        loop {
            if let Some(c) = Self::try_factor(a, tau) {
                return c;
            }
            tau *= 2.0;
        }
    }

    fn try_factor(a: &Matrix, tau: f64) -> Option<Self> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] + tau;
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = math::sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Some(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// `Lᵀ x`
    pub fn lt_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        (0..n).map(|i| (i..n).map(|k| self.l[(k, i)] * x[k]).sum()).collect()
    }

    /// `L⁻¹ x`
    pub fn l_solve(&self, x: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = x.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[(i, k)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        y
    }

    /// `L⁻ᵀ x`
    pub fn lt_solve(&self, x: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = x.to_vec();
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        y
    }

    /// `A⁻¹ x`
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        self.lt_solve(&self.l_solve(x))
    }
}
