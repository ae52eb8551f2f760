//! Subspaces, direct sums and the oblique projectors they induce.

use thiserror::Error;

use crate::numcore::{column_space, column_space_scaled, null_space, rank, ComplexMatrix, Lu, Tolerance, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("parts do not form a direct sum: dimensions add to {dims} in a {ambient}-dimensional space, combined rank {rank}")]
    NotDirectSum { ambient: usize, dims: usize, rank: usize },
    #[error("ambient dimension mismatch: {0} vs {1}")]
    AmbientMismatch(usize, usize),
}

/// Pivot threshold of the echelon reduction, relative to unit-norm spanning vectors.
const PIVOT_FLOOR: f64 = 1e-9;

/// Echelon entries below this magnitude are set to zero.
const SNAP: f64 = 1e-13;

/// A linear subspace of `C^ambient`.
///
/// The canonical basis is the reduced column echelon form of the span: each
/// basis vector has a leading 1 in a pivot coordinate where all other basis
/// vectors vanish. An orthonormal basis of the same span is kept alongside for
/// numerical work.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    canonical: ComplexMatrix,
    ortho: ComplexMatrix,
}

impl PartialEq for Subspace {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.canonical == other.canonical
    }
}

impl Subspace {
    /// The span of the columns of `vectors`.
    pub fn span(vectors: &ComplexMatrix, tol: &Tolerance) -> Self {
        let ortho = column_space(vectors, tol);
        Self::from_orthonormal(ortho)
    }

    /// The span of the columns of `vectors`, treating columns much smaller
    /// than `scale` as zero.
    pub fn span_scaled(vectors: &ComplexMatrix, scale: f64, tol: &Tolerance) -> Self {
        Self::from_orthonormal(column_space_scaled(vectors, scale, tol))
    }

    /// The span of the given vectors in `C^ambient`.
    pub fn span_of(ambient: usize, vectors: &[Vec<C64>], tol: &Tolerance) -> Self {
        Self::span(&ComplexMatrix::from_columns(ambient, vectors), tol)
    }

    /// The span of `basis`, keeping `basis` itself as the canonical basis when
    /// it already is one (up to the echelon pivot floor).
    pub fn from_basis(basis: &ComplexMatrix, tol: &Tolerance) -> Self {
        let mut s = Self::span(basis, tol);
        if s.dim() == basis.cols() && s.canonical.max_abs_diff(basis) < PIVOT_FLOOR {
            s.canonical = basis.clone();
        }
        s
    }

    fn from_orthonormal(ortho: ComplexMatrix) -> Self {
        let canonical = column_echelon(&ortho);
        Self {
            ambient: ortho.rows(),
            canonical,
            ortho,
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            canonical: ComplexMatrix::zeros(ambient, 0),
            ortho: ComplexMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            canonical: ComplexMatrix::identity(ambient),
            ortho: ComplexMatrix::identity(ambient),
        }
    }

    /// Span of the coordinate vectors `e_i` for `i` in `idx`.
    pub fn coordinate(ambient: usize, idx: &[usize]) -> Self {
        let m = ComplexMatrix::from_fn(ambient, idx.len(), |i, j| {
            if i == idx[j] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::from_orthonormal(m)
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.canonical.cols()
    }

    /// Canonical (reduced column echelon) basis.
    pub fn basis(&self) -> &ComplexMatrix {
        &self.canonical
    }

    /// Orthonormal basis of the same span.
    pub fn ortho(&self) -> &ComplexMatrix {
        &self.ortho
    }

    /// Subspace sum.
    pub fn sum(&self, other: &Subspace, tol: &Tolerance) -> Subspace {
        assert_eq!(self.ambient, other.ambient, "ambient mismatch in sum");
        let m = ComplexMatrix::hstack(self.ambient, &[&self.ortho, &other.ortho]);
        Subspace::span(&m, tol)
    }

    /// Sum of several subspaces of one ambient space.
    pub fn sum_all(ambient: usize, parts: &[&Subspace], tol: &Tolerance) -> Subspace {
        let bases: Vec<&ComplexMatrix> = parts.iter().map(|p| &p.ortho).collect();
        Subspace::span(&ComplexMatrix::hstack(ambient, &bases), tol)
    }

    pub fn contains_vector(&self, v: &[C64], tol: &Tolerance) -> bool {
        let m = ComplexMatrix::hstack(self.ambient, &[&self.ortho, &ComplexMatrix::column_vector(v)]);
        rank(&m, tol) == self.dim()
    }

    pub fn contains(&self, other: &Subspace, tol: &Tolerance) -> bool {
        if other.dim() == 0 {
            return true;
        }
        let m = ComplexMatrix::hstack(self.ambient, &[&self.ortho, &other.ortho]);
        rank(&m, tol) == self.dim()
    }

    /// Equality of spans under the rank tolerance.
    pub fn same_span(&self, other: &Subspace, tol: &Tolerance) -> bool {
        self.dim() == other.dim() && self.contains(other, tol)
    }

    /// Largest entrywise difference of canonical bases, infinite if dimensions differ.
    pub fn canonical_distance(&self, other: &Subspace) -> f64 {
        if self.ambient != other.ambient || self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.canonical.max_abs_diff(&other.canonical)
    }

    /// Image under a linear map.
    pub fn map(&self, op: &ComplexMatrix, tol: &Tolerance) -> Subspace {
        image(op, self, tol)
    }
}

/// Reduced column echelon form of the span of the columns of `ortho`.
fn column_echelon(ortho: &ComplexMatrix) -> ComplexMatrix {
    let d = ortho.cols();
    let n = ortho.rows();
    if d == 0 {
        return ComplexMatrix::zeros(n, 0);
    }
    for floor in [PIVOT_FLOOR, 0.0] {
        if let Some(rows) = row_echelon(&ortho.transpose(), floor) {
            return rows.transpose();
        }
    }
    unreachable!("a full-rank basis always has an echelon form")
}

/// Reduced row echelon form of a full-row-rank `d x n` matrix, or `None` if a
/// pivot could not be found above `floor`.
fn row_echelon(m: &ComplexMatrix, floor: f64) -> Option<ComplexMatrix> {
    let (d, n) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut r = 0;
    for c in 0..n {
        if r == d {
            break;
        }
        let (mut p, mut best) = (r, 0.0);
        for i in r..d {
            let v = a[(i, c)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= floor {
            continue;
        }
        if p != r {
            for j in 0..n {
                let t = a[(r, j)];
                a[(r, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
        }
        let inv = a[(r, c)].inv();
        for j in 0..n {
            a[(r, j)] *= inv;
        }
        a[(r, c)] = C64::new(1.0, 0.0);
        for i in 0..d {
            if i == r {
                continue;
            }
            let f = a[(i, c)];
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let t = a[(r, j)];
                a[(i, j)] -= f * t;
            }
            a[(i, c)] = C64::new(0.0, 0.0);
        }
        r += 1;
    }
    if r < d {
        return None;
    }
    // Rounding leaves traces where exact elimination gives zeros; clearing
    // them makes coordinate-aligned spans compare equal as data.
    Some(a.map(|x| {
        let clean = |t: f64| if t.abs() < SNAP { 0.0 } else { t };
        C64::new(clean(x.re), clean(x.im))
    }))
}

/// An ordered decomposition of the ambient space into independent parts.
#[derive(Clone, Debug)]
pub struct DirectSum {
    ambient: usize,
    parts: Vec<Subspace>,
    offsets: Vec<usize>,
    basis: ComplexMatrix,
    inverse: ComplexMatrix,
}

impl DirectSum {
    pub fn new(parts: Vec<Subspace>, tol: &Tolerance) -> Result<Self, SpaceError> {
        let ambient = parts.first().map_or(0, Subspace::ambient_dim);
        if let Some(p) = parts.iter().find(|p| p.ambient != ambient) {
            return Err(SpaceError::AmbientMismatch(ambient, p.ambient));
        }
        let dims: usize = parts.iter().map(Subspace::dim).sum();
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        let mut acc = 0;
        for p in &parts {
            offsets.push(acc);
            acc += p.dim();
        }
        offsets.push(acc);
        let bases: Vec<&ComplexMatrix> = parts.iter().map(|p| &p.ortho).collect();
        let basis = ComplexMatrix::hstack(ambient, &bases);
        if dims != ambient {
            return Err(SpaceError::NotDirectSum {
                ambient,
                dims,
                rank: rank(&basis, tol),
            });
        }
        let lu = Lu::new(&basis);
        if !lu.is_nonsingular(tol) {
            return Err(SpaceError::NotDirectSum {
                ambient,
                dims,
                rank: rank(&basis, tol),
            });
        }
        let inverse = lu.solve(&ComplexMatrix::identity(ambient));
        Ok(Self {
            ambient,
            parts,
            offsets,
            basis,
            inverse,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn parts(&self) -> &[Subspace] {
        &self.parts
    }

    /// Coordinates, in the orthonormal basis of part `i`, of the component of a vector in that part.
    pub fn coordinates(&self, i: usize) -> ComplexMatrix {
        self.inverse.row_range(self.offsets[i], self.parts[i].dim())
    }

    /// Oblique projector onto part `i` along the others.
    pub fn projector(&self, i: usize) -> ComplexMatrix {
        let d = self.parts[i].dim();
        if d == 0 {
            return ComplexMatrix::zeros(self.ambient, self.ambient);
        }
        &self.basis.column_range(self.offsets[i], d) * &self.coordinates(i)
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        (0..self.parts.len()).map(|i| self.projector(i)).collect()
    }
}

/// Oblique projectors onto each part of `d` along the others.
pub fn projectors_of(d: &DirectSum) -> Vec<ComplexMatrix> {
    d.projectors()
}

/// Intersection of two subspaces via the kernel of `[B1 | -B2]`.
pub fn intersect(s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Subspace {
    assert_eq!(s1.ambient, s2.ambient, "ambient mismatch in intersect");
    let n = s1.ambient;
    if s1.dim() == 0 || s2.dim() == 0 {
        return Subspace::zero(n);
    }
    let stacked = ComplexMatrix::hstack(n, &[s1.ortho(), &(-s2.ortho())]);
    let ker = null_space(&stacked, tol);
    if ker.cols() == 0 {
        return Subspace::zero(n);
    }
    let a = ker.row_range(0, s1.dim());
    Subspace::span(&(s1.ortho() * &a), tol)
}

/// Tensor product: Kronecker products of basis vectors.
pub fn tensor_product(s1: &Subspace, s2: &Subspace) -> Subspace {
    // Kronecker products of orthonormal bases are orthonormal.
    Subspace::from_orthonormal(s1.ortho.kron(&s2.ortho))
}

/// Image of a subspace under a linear map.
pub fn image(op: &ComplexMatrix, s: &Subspace, tol: &Tolerance) -> Subspace {
    assert_eq!(op.cols(), s.ambient, "operator does not act on the subspace's ambient space");
    Subspace::span_scaled(&(op * s.ortho()), op.frobenius_norm(), tol)
}
