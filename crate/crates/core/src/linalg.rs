//! Small dense linear algebra: row-major matrices, Cholesky factors and a
//! Jacobi symmetric eigensolver.
//!
//! Matrices here are at most a few dozen rows on a side (input and output
//! dimensions), so straightforward O(d³) kernels are used throughout.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row vectors; all rows must have equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// `self += alpha * u vᵀ`
    pub fn add_outer(&mut self, alpha: T, u: &[T], v: &[T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            let a = alpha * ui;
            for (d, &vj) in self.row_mut(i).iter_mut().zip(v) {
                *d = *d + a * vj;
            }
        }
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// Replaces the matrix with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest asymmetry relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        let scale = self.max_abs();
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }

    /// Strictly-upper-triangular part zeroed.
    pub fn lower_part(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                m[(i, j)] = T::zero();
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn sub_vec<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn outer<T: Real>(u: &[T], v: &[T]) -> Matrix<T> {
    let mut m = Matrix::zeros(u.len(), v.len());
    m.add_outer(T::one(), u, v);
    m
}

/// Lower-triangular matrix; as a Cholesky factor its diagonal is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T>(Matrix<T>);

impl<T: Real> LowerTriangular<T> {
    /// Wraps `m`, rejecting non-square input or non-zero strict upper entries.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("triangular factor must be square".into()));
        }
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if m[(i, j)] != T::zero() {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) above the diagonal is non-zero"
                    )));
                }
            }
        }
        Ok(LowerTriangular(m))
    }

    /// Takes the lower part of `m`, ignoring anything above the diagonal.
    pub fn from_lower(m: &Matrix<T>) -> Self {
        LowerTriangular(m.lower_part())
    }

    pub fn identity(d: usize) -> Self {
        LowerTriangular(Matrix::identity(d))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0[(i, j)]
    }

    /// True when every diagonal entry is strictly positive and finite.
    pub fn is_valid_factor(&self) -> bool {
        self.0.diag().iter().all(|&d| d > T::zero() && d.is_finite()) && self.0.is_finite()
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> Matrix<T> {
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let mut s = T::zero();
                for k in 0..=j {
                    s = s + self.0[(i, k)] * self.0[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// `2 Σ log Lᵢᵢ`, the log-determinant of `L Lᵀ`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.0.diag().into_iter().map(|d| d.ln()).sum::<T>() * two
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut z = b.to_vec();
        for i in 0..d {
            let row = self.0.row(i);
            let mut s = z[i];
            for k in 0..i {
                s = s - row[k] * z[k];
            }
            z[i] = s / row[i];
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn solve_upper_t(&self, z: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut x = z.to_vec();
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in (i + 1)..d {
                s = s - self.0[(k, i)] * x[k];
            }
            x[i] = s / self.0[(i, i)];
        }
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper_t(&self.solve_lower(b))
    }

    /// `vᵀ (L Lᵀ)⁻¹ v`
    pub fn inv_quad(&self, v: &[T]) -> T {
        let z = self.solve_lower(v);
        dot(&z, &z)
    }

    /// `L v`
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d).map(|i| dot(&self.0.row(i)[..=i], &v[..=i])).collect()
    }

    /// `Lᵀ v`
    pub fn t_mul_vec(&self, v: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut out = vec![T::zero(); d];
        for i in 0..d {
            let row = self.0.row(i);
            for j in 0..=i {
                out[j] = out[j] + row[j] * v[i];
            }
        }
        out
    }

    /// `(L Lᵀ)⁻¹` through triangular solves against the identity.
    pub fn inverse_of_product(&self) -> Matrix<T> {
        let d = self.dim();
        let mut inv = Matrix::zeros(d, d);
        let mut e = vec![T::zero(); d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }

    /// Inverse of the triangular factor itself (also lower triangular).
    pub fn inverse(&self) -> LowerTriangular<T> {
        let d = self.dim();
        let mut inv = Matrix::zeros(d, d);
        let mut e = vec![T::zero(); d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve_lower(&e);
            for i in j..d {
                inv[(i, j)] = col[i];
            }
        }
        LowerTriangular(inv)
    }

    /// `self · other` for two lower-triangular matrices.
    pub fn mul(&self, other: &LowerTriangular<T>) -> LowerTriangular<T> {
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let mut s = T::zero();
                for k in j..=i {
                    s = s + self.0[(i, k)] * other.0[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        LowerTriangular(out)
    }
}

/// Cholesky factorization `A = L Lᵀ` reading the lower triangle of `a`.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<LowerTriangular<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    for j in 0..d {
        let mut s = a[(j, j)];
        for k in 0..j {
            s = s - l[(j, k)] * l[(j, k)];
        }
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: s.to_f64().unwrap_or(f64::NAN),
            });
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular(l))
}

/// `log det A` for positive definite `A`.
pub fn log_det_pd<T: Real>(a: &Matrix<T>) -> Result<T> {
    Ok(cholesky(a)?.log_det())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors stored as columns.
pub fn sym_eigen<T: Real>(a: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("eigendecomposition of non-square matrix".into()));
    }
    let d = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(d);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..d {
            for j in (i + 1)..d {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        let scale = m.frobenius_norm();
        if off.sqrt() <= eps * scale || off == T::zero() {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Matrix::zeros(d, d);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..d {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    Ok((values, vecs))
}

/// `V diag(f(λ)) Vᵀ` from an eigendecomposition.
pub fn eigen_reassemble<T: Real>(values: &[T], vectors: &Matrix<T>, f: impl Fn(T) -> T) -> Matrix<T> {
    let d = values.len();
    let mut out = Matrix::zeros(d, d);
    for (k, &lam) in values.iter().enumerate() {
        let w = f(lam);
        let col = vectors.column(k);
        out.add_outer(w, &col, &col);
    }
    out.symmetrize();
    out
}
