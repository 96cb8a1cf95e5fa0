//! Small dense linear algebra: a row-major matrix, Householder QR,
//! least squares with a ridge fallback, and a Jacobi symmetric eigensolver.
//!
//! The matrices in this crate are tall and thin (many data rows, at most a
//! few hundred coefficient columns), so nothing here tries to be blocked or
//! cache-oblivious.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "crate::serde_impls::MatrixRepr", into = "crate::serde_impls::MatrixRepr"))]
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

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data: data.to_vec() }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len(), "Matrix::from_rows")?;
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            check_dim(rows, c.len(), "Matrix::from_columns")?;
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self::from_row_slice(v.len(), 1, v)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
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

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in a_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn tr_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "tr_matmul shape");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, a) in a_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · v` for a vector `v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape");
        (0..self.rows).map(|i| math::dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec shape");
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "add shape");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "sub shape");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack shape");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Thin QR factorisation `A = Q R` of a `p × q` matrix with `p ≥ q`.
///
/// `R` has a nonnegative diagonal. `rank_deficient` is set when some
/// `|R_jj|` falls below `tol · max_j ‖A_j‖`.
#[derive(Clone, Debug)]
pub struct ThinQr {
    pub q: Matrix,
    pub r: Matrix,
    pub rank_deficient: bool,
}

pub fn thin_qr(a: &Matrix, tol: f64) -> ThinQr {
    let (p, q) = a.shape();
    assert!(p >= q, "thin_qr needs at least as many rows as columns");
    let scale = (0..q).map(|j| math::norm(&a.column(j))).fold(0.0, f64::max);

    let mut work = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(q);
    for k in 0..q {
        let mut v: Vec<f64> = (k..p).map(|i| work[(i, k)]).collect();
        let x_norm = math::norm(&v);
        if x_norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -x_norm } else { x_norm };
        v[0] -= alpha;
        let v_norm = math::norm(&v);
        if v_norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for x in v.iter_mut() {
            *x /= v_norm;
        }
        for j in k..q {
            let s: f64 = (k..p).map(|i| v[i - k] * work[(i, j)]).sum();
            for i in k..p {
                work[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        reflectors.push(v);
    }

    let mut r = Matrix::zeros(q, q);
    for i in 0..q {
        for j in i..q {
            r[(i, j)] = work[(i, j)];
        }
    }

    // Q = H_0 H_1 ... H_{q-1} applied to the first q columns of the identity.
    let mut qm = Matrix::zeros(p, q);
    for j in 0..q {
        qm[(j, j)] = 1.0;
    }
    for k in (0..q).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..q {
            let s: f64 = (k..p).map(|i| v[i - k] * qm[(i, j)]).sum();
            for i in k..p {
                qm[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
    }

    for j in 0..q {
        if r[(j, j)] < 0.0 {
            for c in j..q {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..p {
                qm[(i, j)] = -qm[(i, j)];
            }
        }
    }

    let threshold = tol * scale.max(f64::MIN_POSITIVE);
    let rank_deficient = (0..q).any(|j| r[(j, j)].abs() <= threshold);
    ThinQr { q: qm, r, rank_deficient }
}

/// Orthonormal basis for the column span of `a` (Q of the thin QR).
pub fn orthonormalize(a: &Matrix) -> Matrix {
    thin_qr(a, 0.0).q
}

/// Solves the upper-triangular system `R x = b`.
pub fn solve_upper(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = r.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    /// Root-mean-square residual `‖A x − b‖ / √R`.
    pub rms_residual: f64,
    /// Numerical rank of `A`.
    pub rank: usize,
    /// `rank < cols`; the minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Pivots smaller than this fraction of the largest one count as zero.
const RANK_TOL: f64 = 1e-10;

/// Minimum-norm least-squares solve of `A x ≈ b`.
///
/// Householder QR with column pivoting, `A P = Q [R₁; 0]`, truncated at the
/// numerical rank `r`. When `r` is less than the column count the
/// trapezoidal `R₁` is factored once more, `R₁ᵀ = Z L`, which yields the
/// solution of smallest norm (a complete orthogonal decomposition).
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    check_dim(a.rows(), b.len(), "least_squares rhs")?;
    let (rows, p) = a.shape();
    if rows == 0 || p == 0 {
        return Err(Error::InvalidArgument("least squares on an empty system".into()));
    }

    let mut w = a.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let steps = rows.min(p);
    let mut v = vec![0.0; rows];
    for k in 0..steps {
        let tail_norm2 = |w: &Matrix, c: usize| (k..rows).map(|i| w[(i, c)] * w[(i, c)]).sum::<f64>();
        let pivot = (k..p).max_by(|&x, &y| tail_norm2(&w, x).total_cmp(&tail_norm2(&w, y))).expect("k < p");
        if pivot != k {
            for i in 0..rows {
                let t = w[(i, k)];
                w[(i, k)] = w[(i, pivot)];
                w[(i, pivot)] = t;
            }
            perm.swap(k, pivot);
        }
        let x_norm = math::sqrt(tail_norm2(&w, k));
        if x_norm == 0.0 {
            break;
        }
        let alpha = if w[(k, k)] >= 0.0 { -x_norm } else { x_norm };
        for i in k..rows {
            v[i] = w[(i, k)];
        }
        v[k] -= alpha;
        let v_norm2: f64 = (k..rows).map(|i| v[i] * v[i]).sum();
        if v_norm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..rows).map(|i| v[i] * w[(i, j)]).sum::<f64>() * 2.0 / v_norm2;
            for i in k..rows {
                w[(i, j)] -= s * v[i];
            }
        }
        let s: f64 = (k..rows).map(|i| v[i] * qtb[i]).sum::<f64>() * 2.0 / v_norm2;
        for i in k..rows {
            qtb[i] -= s * v[i];
        }
    }

    let largest = if steps > 0 { w[(0, 0)].abs() } else { 0.0 };
    let rank = (0..steps).take_while(|&k| w[(k, k)].abs() > RANK_TOL * largest).count();
    let mut y = vec![0.0; p];
    if rank == p {
        let mut r = Matrix::zeros(p, p);
        for i in 0..p {
            r.row_mut(i)[i..].copy_from_slice(&w.row(i)[i..]);
        }
        y = solve_upper(&r, &qtb[..p]);
    } else if rank > 0 {
        // R₁ᵀ (p × r) = Z L, so R₁ y = c has minimum-norm solution
        // y = Z L⁻ᵀ c.
        let mut r1t = Matrix::zeros(p, rank);
        for i in 0..rank {
            for j in i..p {
                r1t[(j, i)] = w[(i, j)];
            }
        }
        let f = thin_qr(&r1t, 0.0);
        let mut t = vec![0.0; rank];
        for i in 0..rank {
            let s: f64 = (0..i).map(|j| f.r[(j, i)] * t[j]).sum();
            t[i] = (qtb[i] - s) / f.r[(i, i)];
        }
        y = f.q.mul_vec(&t);
    }
    let mut x = vec![0.0; p];
    for (k, &col) in perm.iter().enumerate() {
        x[col] = y[k];
    }

    let fitted = a.mul_vec(&x);
    let sq: f64 = fitted.iter().zip(b).map(|(f, t)| (f - t) * (f - t)).sum();
    Ok(LeastSquares { solution: x, rms_residual: math::sqrt(sq / rows as f64), rank, rank_deficient: rank < p })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// matrix columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total: f64 = m.as_slice().iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    (values, vectors)
}

/// Cosines of the principal angles between the column spans of two
/// matrices with orthonormal columns, in descending order.
pub fn principal_cosines(a: &Matrix, b: &Matrix) -> Vec<f64> {
    let c = a.tr_matmul(b);
    let (vals, _) = symmetric_eigen(&c.tr_matmul(&c));
    let mut cos: Vec<f64> = vals.iter().map(|v| math::sqrt(v.max(0.0)).min(1.0)).collect();
    cos.reverse();
    cos
}
