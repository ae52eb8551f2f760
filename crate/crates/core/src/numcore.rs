//! Dense complex linear algebra with an explicit tolerance policy.
//!
//! Matrices are small (ambient dimensions of a few hundred at most), so the
//! routines here favour robustness: rank and null-space decisions go through
//! the singular value decomposition, square solves through LU with complete
//! pivoting.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use thiserror::Error;

/// Complex double-precision scalar used throughout the crate.
pub type C64 = Complex64;

/// Shorthand for a complex number from its real and imaginary parts.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Shorthand for a real complex number.
#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("operator is singular on the requested subspace")]
    SingularOnSubspace,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tolerance: rank_rel must lie in (0, 1) and residual_abs must be positive")]
    InvalidTolerance,
}

/// Thresholds used for rank decisions and for verifying solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Singular values (or pivots) below `rank_rel` times the largest one count as zero.
    pub rank_rel: f64,
    /// Bound on residuals of verified solves, scaled by the size of the data.
    pub residual_abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            residual_abs: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(rank_rel: f64, residual_abs: f64) -> Result<Self, LinalgError> {
        if !(rank_rel > 0.0 && rank_rel < 1.0) || !(residual_abs > 0.0) || !residual_abs.is_finite() {
            return Err(LinalgError::InvalidTolerance);
        }
        Ok(Self {
            rank_rel,
            residual_abs,
        })
    }

    /// Absolute cutoff for a set of singular values whose largest is `scale`.
    pub fn cutoff(&self, scale: f64) -> f64 {
        self.rank_rel * scale
    }
}

/// Dense complex matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// Builds a real matrix from rows of equal length.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().map(|&x| re(x))).collect(),
        }
    }

    /// Builds a `len x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(len: usize, columns: &[Vec<C64>]) -> Self {
        assert!(columns.iter().all(|c| c.len() == len), "column length mismatch");
        Self::from_fn(len, columns.len(), |i, j| columns[j][i])
    }

    pub fn column_vector(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn scalar(x: C64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
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
    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn column_vectors(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// Columns selected by index, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    pub fn column_range(&self, start: usize, len: usize) -> Self {
        Self::from_fn(self.rows, len, |i, j| self[(i, start + j)])
    }

    pub fn row_range(&self, start: usize, len: usize) -> Self {
        Self::from_fn(len, self.cols, |i, j| self[(start + i, j)])
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Writes `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &ComplexMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Horizontal concatenation. All parts must have `rows` rows.
    pub fn hstack(rows: usize, parts: &[&ComplexMatrix]) -> Self {
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        out
    }

    /// Vertical concatenation. All parts must have `cols` columns.
    pub fn vstack(cols: usize, parts: &[&ComplexMatrix]) -> Self {
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vstack column mismatch");
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    /// Block-diagonal matrix.
    pub fn block_diag(parts: &[&ComplexMatrix]) -> Self {
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for p in parts {
            out.set_block(r0, c0, p);
            r0 += p.rows;
            c0 += p.cols;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Kronecker product.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// Determinant by LU with complete pivoting. Empty matrices have determinant 1.
    pub fn det(&self) -> C64 {
        assert!(self.is_square(), "determinant of a non-square matrix");
        if self.rows == 0 {
            return C64::new(1.0, 0.0);
        }
        Lu::new(self).det()
    }

}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul mismatch {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl Mul<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        &self * rhs
    }
}

impl Mul<ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        self * &rhs
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Mul<C64> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

macro_rules! elementwise {
    ($tr:ident, $f:ident, $atr:ident, $af:ident, $op:tt) => {
        impl $tr for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                ComplexMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                &self $op &rhs
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                &self $op rhs
            }
        }
        impl $tr<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                self $op &rhs
            }
        }
        impl $atr<&ComplexMatrix> for ComplexMatrix {
            fn $af(&mut self, rhs: &ComplexMatrix) {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a = *a $op b;
                }
            }
        }
    };
}

elementwise!(Add, add, AddAssign, add_assign, +);
elementwise!(Sub, sub, SubAssign, sub_assign, -);

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|x| -x)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        -&self
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let x = self[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", x.re, x.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// LU factorization with complete pivoting: `P A Q = L U`.
pub(crate) struct Lu {
    n: usize,
    lu: Vec<C64>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub(crate) fn new(a: &ComplexMatrix) -> Self {
        assert!(a.is_square());
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (mut pi, mut pj, mut best) = (k, k, -1.0);
            for i in k..n {
                for j in k..n {
                    let v = lu[i * n + j].norm_sqr();
                    if v > best {
                        best = v;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if pi != k {
                for j in 0..n {
                    lu.swap(k * n + j, pi * n + j);
                }
                row_perm.swap(k, pi);
                swaps += 1;
            }
            if pj != k {
                for i in 0..n {
                    lu.swap(i * n + k, i * n + pj);
                }
                col_perm.swap(k, pj);
                swaps += 1;
            }
            let p = lu[k * n + k];
            if best <= 0.0 {
                break;
            }
            for i in k + 1..n {
                let l = lu[i * n + k] / p;
                lu[i * n + k] = l;
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= l * u;
                }
            }
        }
        Self {
            n,
            lu,
            row_perm,
            col_perm,
            swaps,
        }
    }

    fn pivot(&self, k: usize) -> C64 {
        self.lu[k * self.n + k]
    }

    /// Whether all pivots exceed `rank_rel` times the largest one.
    pub(crate) fn is_nonsingular(&self, tol: &Tolerance) -> bool {
        if self.n == 0 {
            return true;
        }
        let first = self.pivot(0).norm();
        if first == 0.0 {
            return false;
        }
        (0..self.n).all(|k| self.pivot(k).norm() > tol.cutoff(first))
    }

    pub(crate) fn det(&self) -> C64 {
        let mut d = C64::new(1.0, 0.0);
        for k in 0..self.n {
            d *= self.pivot(k);
        }
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    pub(crate) fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        assert_eq!(b.rows, n);
        let mut x = ComplexMatrix::zeros(n, b.cols);
        let mut y = vec![C64::new(0.0, 0.0); n];
        for c in 0..b.cols {
            for i in 0..n {
                y[i] = b[(self.row_perm[i], c)];
            }
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= self.lu[i * n + k] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= self.lu[i * n + k] * y[k];
                }
                y[i] = s / self.lu[i * n + i];
            }
            for i in 0..n {
                x[(self.col_perm[i], c)] = y[i];
            }
        }
        x
    }
}

/// Singular values and vectors of a matrix, padded so that `v` is square.
struct Svd {
    u: ComplexMatrix,
    sigma: Vec<f64>,
    v: ComplexMatrix,
}

/// One-sided Jacobi SVD. Wide matrices are padded with zero rows so that
/// `v` is always square.
fn svd(m: &ComplexMatrix) -> Svd {
    let rows = m.rows.max(m.cols);
    let n = m.cols;
    let zero = C64::new(0.0, 0.0);
    let mut a: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut col = vec![zero; rows];
            for (i, x) in col.iter_mut().take(m.rows).enumerate() {
                *x = m[(i, j)];
            }
            col
        })
        .collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut col = vec![zero; n];
            col[j] = C64::new(1.0, 0.0);
            col
        })
        .collect();
    let rotate = |cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64| {
        let (lo, hi) = cols.split_at_mut(q);
        for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
            let (xp, yq) = (*x, *y * phase.conj());
            *x = xp * c - yq * s;
            *y = xp * s + yq * c;
        }
    };
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|x| x.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|x| x.norm_sqr()).sum();
                let gamma: C64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = a.iter().map(|col| col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = ComplexMatrix::zeros(m.rows, n);
    let mut vm = ComplexMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        sigma.push(norms[j]);
        if norms[j] > 0.0 {
            for i in 0..m.rows {
                u[(i, k)] = a[j][i] / norms[j];
            }
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    Svd { u, sigma, v: vm }
}

fn rank_cutoff(sigma: &[f64], tol: &Tolerance) -> f64 {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    tol.cutoff(smax)
}

/// Numerical rank: number of singular values above `rank_rel` times the largest.
pub fn rank(m: &ComplexMatrix, tol: &Tolerance) -> usize {
    if m.is_empty() || m.max_abs() == 0.0 {
        return 0;
    }
    let s = svd(m);
    let cut = rank_cutoff(&s.sigma, tol);
    s.sigma.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    if m.cols == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if m.rows == 0 || m.max_abs() == 0.0 {
        return ComplexMatrix::identity(m.cols);
    }
    let s = svd(m);
    let cut = rank_cutoff(&s.sigma, tol);
    let idx: Vec<usize> = (0..s.v.cols)
        .filter(|&k| s.sigma.get(k).is_none_or(|&x| x <= cut))
        .collect();
    s.v.select_columns(&idx)
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    column_space_scaled(m, 0.0, tol)
}

/// Column space with singular values compared against `max(σ_max, scale)`,
/// so vectors that are numerically zero relative to `scale` are dropped.
pub fn column_space_scaled(m: &ComplexMatrix, scale: f64, tol: &Tolerance) -> ComplexMatrix {
    if m.is_empty() || m.max_abs() == 0.0 {
        return ComplexMatrix::zeros(m.rows, 0);
    }
    let s = svd(m);
    let cut = rank_cutoff(&s.sigma, tol).max(tol.cutoff(scale));
    let idx: Vec<usize> = (0..s.sigma.len().min(s.u.cols))
        .filter(|&k| s.sigma[k] > cut)
        .collect();
    s.u.select_columns(&idx)
}

/// Moore-Penrose pseudo-inverse with the rank cutoff of `tol`.
pub fn pseudo_inverse(m: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    if m.is_empty() || m.max_abs() == 0.0 {
        return ComplexMatrix::zeros(m.cols, m.rows);
    }
    let s = svd(m);
    let cut = rank_cutoff(&s.sigma, tol);
    let mut out = ComplexMatrix::zeros(m.cols, m.rows);
    for k in 0..s.sigma.len().min(s.u.cols) {
        if s.sigma[k] <= cut {
            continue;
        }
        let inv = 1.0 / s.sigma[k];
        for i in 0..m.cols {
            let vik = s.v[(i, k)] * inv;
            for j in 0..m.rows {
                out[(i, j)] += vik * s.u[(j, k)].conj();
            }
        }
    }
    out
}

/// Solves `a x = b` for square or overdetermined `a`.
///
/// Nonsingular square systems use LU with complete pivoting; everything else
/// is solved in the least-squares sense and accepted only if the residual is
/// small, so a rank-deficient `a` with consistent `b` still succeeds.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix, LinalgError> {
    if a.rows != b.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "a has {} rows, b has {}",
            a.rows, b.rows
        )));
    }
    if a.cols == 0 {
        return if b.max_abs() <= tol.residual_abs {
            Ok(ComplexMatrix::zeros(0, b.cols))
        } else {
            Err(LinalgError::Singular)
        };
    }
    if a.is_square() {
        let lu = Lu::new(a);
        if lu.is_nonsingular(tol) {
            return Ok(lu.solve(b));
        }
    }
    let x = &pseudo_inverse(a, tol) * b;
    let res = (a * &x - b).frobenius_norm();
    let scale = 1.0 + a.frobenius_norm() * x.frobenius_norm() + b.frobenius_norm();
    if res <= tol.residual_abs * scale {
        Ok(x)
    } else {
        Err(LinalgError::Singular)
    }
}

/// Inverse of a nonsingular square matrix.
pub fn inverse(a: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    if a.rows == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let lu = Lu::new(a);
    if !lu.is_nonsingular(tol) {
        return Err(LinalgError::Singular);
    }
    Ok(lu.solve(&ComplexMatrix::identity(a.rows)))
}

/// Whether a square matrix is nonsingular under the pivot test of `tol`.
pub fn is_nonsingular(a: &ComplexMatrix, tol: &Tolerance) -> bool {
    a.is_square() && Lu::new(a).is_nonsingular(tol)
}

/// Inverse of `a` on the subspace spanned by the columns of `s_basis`.
///
/// The compression `C = S⁺ a S` is inverted and the result `S C⁻¹ S⁺` maps
/// the ambient space into span(S). When `a` maps span(S) into itself this is
/// the two-sided inverse of `a` restricted to that subspace.
pub fn restricted_inverse(
    a: &ComplexMatrix,
    s_basis: &ComplexMatrix,
    tol: &Tolerance,
) -> Result<ComplexMatrix, LinalgError> {
    let n = a.rows;
    if !a.is_square() || s_basis.rows != n {
        return Err(LinalgError::DimensionMismatch(
            "restricted_inverse needs a square operator and a basis of its space".into(),
        ));
    }
    if s_basis.cols == 0 {
        return Ok(ComplexMatrix::zeros(n, n));
    }
    let left = pseudo_inverse(s_basis, tol);
    let comp = &left * &(a * s_basis);
    let lu = Lu::new(&comp);
    if !lu.is_nonsingular(tol) {
        return Err(LinalgError::SingularOnSubspace);
    }
    Ok(s_basis * &lu.solve(&left))
}
