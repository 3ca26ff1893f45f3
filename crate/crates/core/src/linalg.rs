//! Dense linear algebra for the surrogate fits: a row-major matrix, Cholesky
//! factorisation for correlation matrices and Householder QR with column
//! pivoting for least-squares problems.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math;
use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a flat row-major buffer.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero chunk size
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xi) in self.row_iter().zip(x) {
            axpy(xi, r, &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), dst);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
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

#[inline]
/// Inner product over the common length, accumulated in four interleaved
/// partial sums (a fixed order, so results are reproducible).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorises `a`, reading only its lower triangle.
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let (head, tail) = l.data.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            let mut d = a[(j, j)];
            for k in 0..j {
                let mut s = a[(j, k)];
                let row_k = &head[k * n..k * n + k];
                s -= dot(row_k, &row_j[..k]);
                row_j[k] = s / head[k * n + k];
            }
            d -= dot(&row_j[..j], &row_j[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, duplicate: None });
            }
            row_j[j] = math::sqrt(d);
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            b[i] /= self.l[(i, i)];
            let bi = b[i];
            let row = self.l.row(i);
            axpy(-bi, &row[..i], &mut b[..i]);
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `L⁻¹ B` for every column of `B`.
    pub fn solve_lower_matrix(&self, b: &Matrix) -> Matrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut out = b.clone();
        let m = b.cols();
        for i in 0..n {
            let lii = self.l[(i, i)];
            let (done, rest) = out.data.split_at_mut(i * m);
            let row_i = &mut rest[..m];
            for (k, &lik) in self.l.row(i)[..i].iter().enumerate() {
                if lik != 0.0 {
                    axpy(-lik, &done[k * m..(k + 1) * m], row_i);
                }
            }
            for v in row_i.iter_mut() {
                *v /= lii;
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| math::ln(self.l[(i, i)])).sum::<f64>()
    }

    /// Explicit inverse of the lower factor, built row by row.
    pub fn lower_inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut acc = vec![0.0; n];
        for i in 0..n {
            acc[..i].iter_mut().for_each(|v| *v = 0.0);
            let li = self.l.row(i);
            for (k, &lik) in li[..i].iter().enumerate() {
                if lik != 0.0 {
                    axpy(lik, &inv.data[k * n..k * n + k + 1], &mut acc[..=k]);
                }
            }
            let d = 1.0 / li[i];
            let row = inv.row_mut(i);
            for (r, a) in row[..i].iter_mut().zip(&acc[..i]) {
                *r = -a * d;
            }
            row[i] = d;
        }
        inv
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`. Only used where the full inverse is genuinely needed
    /// (likelihood gradients).
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let li = self.lower_inverse();
        let mut inv = Matrix::zeros(n, n);
        // accumulate the lower triangle as a sum of outer products of the rows of L⁻¹
        for k in 0..n {
            let lk = li.row(k);
            for i in 0..=k {
                let a = lk[i];
                if a != 0.0 {
                    axpy(a, &lk[..=i], &mut inv.data[i * n..i * n + i + 1]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                inv.data[j * n + i] = inv.data[i * n + j];
            }
        }
        inv
    }
}

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Transposed working array: row `j` holds column `j`, with `R` on and
    /// above the diagonal and the Householder vector below it.
    cols: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut w = a.transpose();
        let k = m.min(n);
        let mut tau = vec![0.0; k];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms = vec![0.0; n];

        for j in 0..k {
            // pivot on the largest remaining column norm; recomputed exactly to
            // avoid the drift of downdated norms
            for (c, nc) in norms.iter_mut().enumerate().skip(j) {
                let col = &w.row(c)[j..];
                *nc = dot(col, col);
            }
            let p = (j..n).fold(j, |best, c| if norms[c] > norms[best] { c } else { best });
            if p != j {
                let (lo, hi) = w.data.split_at_mut(p * m);
                lo[j * m..(j + 1) * m].swap_with_slice(&mut hi[..m]);
                perm.swap(j, p);
                norms.swap(j, p);
            }

            let alpha = math::sqrt(norms[j]);
            if alpha == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let (head, rest) = w.data.split_at_mut((j + 1) * m);
            let v = &mut head[j * m..];
            let x0 = v[j];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - beta;
            for vi in &mut v[j + 1..] {
                *vi /= v0;
            }
            let t = (beta - x0) / beta;
            tau[j] = t;
            v[j] = beta;
            let v = &v[j + 1..];

            for col in rest.chunks_exact_mut(m) {
                let s = t * (col[j] + dot(v, &col[j + 1..]));
                col[j] -= s;
                axpy(-s, v, &mut col[j + 1..]);
            }
        }
        Self { cols: w, tau, perm }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cols[(j, i)]
    }

    pub fn rows(&self) -> usize {
        self.cols.cols()
    }

    pub fn cols(&self) -> usize {
        self.cols.rows()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|i| self.at(i, i)).collect()
    }

    /// `|R₀₀| / |R_kk|` over the last diagonal entry; a cheap lower bound on
    /// the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.r_diagonal();
        match (d.first(), d.last()) {
            (Some(a), Some(b)) if *b != 0.0 => a.abs() / b.abs(),
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    #[inline]
    fn reflect(&self, j: usize, b: &mut [f64]) {
        let t = self.tau[j];
        if t == 0.0 {
            return;
        }
        let v = &self.cols.row(j)[j + 1..];
        let s = t * (b[j] + dot(v, &b[j + 1..]));
        b[j] -= s;
        axpy(-s, v, &mut b[j + 1..]);
    }

    /// Applies `Qᵀ` to `b` in place.
    pub fn apply_qt(&self, b: &mut [f64]) {
        for j in 0..self.tau.len() {
            self.reflect(j, b);
        }
    }

    /// Applies `Q` to `b` in place.
    pub fn apply_q(&self, b: &mut [f64]) {
        for j in (0..self.tau.len()).rev() {
            self.reflect(j, b);
        }
    }

    /// Solves `R z = c` for the leading `cols()` entries (back substitution).
    fn solve_r(&self, c: &mut [f64]) {
        let n = self.cols();
        for i in (0..n).rev() {
            c[i] /= self.at(i, i);
            let ci = c[i];
            // column i of R above the diagonal is contiguous
            axpy(-ci, &self.cols.row(i)[..i], &mut c[..i]);
        }
    }

    /// Solves `Rᵀ z = c` (forward substitution).
    fn solve_rt(&self, c: &mut [f64]) {
        let n = self.cols();
        for i in 0..n {
            let s = c[i] - dot(&self.cols.row(i)[..i], &c[..i]);
            c[i] = s / self.at(i, i);
        }
    }

    /// Minimum-residual solution of `A x ≈ b`; assumes full column rank.
    pub fn solve_least_squares(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        self.solve_r(&mut c[..n]);
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = c[k];
        }
        x
    }

    /// `vᵀ (AᵀA)⁻¹ v` computed as `‖R⁻ᵀ Pᵀ v‖²`.
    pub fn gram_inverse_quadratic(&self, v: &[f64]) -> f64 {
        let mut w: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        self.solve_rt(&mut w);
        dot(&w, &w)
    }

    /// Row norms² of the thin `Q`, i.e. the diagonal of the hat matrix `A (AᵀA)⁻¹ Aᵀ`.
    pub fn hat_diagonal(&self) -> Vec<f64> {
        let (m, n) = (self.rows(), self.cols());
        let mut h = vec![0.0; m];
        let mut e = vec![0.0; m];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            for (hi, qi) in h.iter_mut().zip(&e) {
                *hi += qi * qi;
            }
        }
        h
    }

    /// `Qᵀ` restricted to its first `cols()` rows applied to `b`.
    pub fn thin_qt(&self, b: &[f64]) -> Vec<f64> {
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        c.truncate(self.cols());
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix {
        let b = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let mut a = b.transpose().matmul(&b);
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(6);
        let c = Cholesky::new(&a).unwrap();
        let l = c.factor();
        let back = l.matmul(&l.transpose());
        for i in 0..6 {
            for j in 0..6 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
        let x = c.solve(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let ax = a.mul_vec(&x);
        for (k, v) in ax.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-10);
        }
        let inv = c.inverse();
        let id = a.matmul(&inv);
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::new(&a), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn lower_solve_matrix_matches_vector_solve() {
        let a = spd(5);
        let c = Cholesky::new(&a).unwrap();
        let b = Matrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64);
        let x = c.solve_lower_matrix(&b);
        for j in 0..2 {
            let mut col = b.column(j);
            c.solve_lower_in_place(&mut col);
            for i in 0..5 {
                assert!((x[(i, j)] - col[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn qr_least_squares_overdetermined() {
        // y = 1 + 2 t fitted exactly from 5 points
        let a = Matrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * i as f64).collect();
        let qr = PivotedQr::new(&a);
        let x = qr.solve_least_squares(&y);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        let h = qr.hat_diagonal();
        // trace of the hat matrix equals the number of columns
        assert!((h.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn qr_detects_dependent_columns() {
        let a = Matrix::from_fn(4, 3, |i, j| if j == 2 { 2.0 * i as f64 } else { (i * (j + 1)) as f64 + j as f64 });
        let qr = PivotedQr::new(&a);
        assert!(qr.condition_estimate() > 1e12);
    }
}
