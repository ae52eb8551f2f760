//! Operations on collections that act on their associated functions:
//! sums, products, substitution, duality, extension, reference transforms,
//! inverses, identities, phase merges, embeddings and basis changes.
//!
//! New ambients are built concretely as coordinate direct sums; the spaces
//! `E` and `J` of a composite are obtained by solving the linear constraints
//! that define them (null spaces), so their dimensions can be checked.

use thiserror::Error;

use crate::collections::{split_coordinates, CollectionError, Superfunction, YCollection, ZCollection};
use crate::numcore::{inverse, is_nonsingular, null_space, rank, re, ComplexMatrix, Tolerance, C64};
use crate::spaces::{image, intersect, Subspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("map between port or V spaces is singular")]
    SingularMap,
    #[error("superfunctions have port dimensions {0} and {1}")]
    PortMismatch(usize, usize),
    #[error("coupling operator is singular: E and J of the product intersect")]
    CouplingSingular,
    #[error("M^J − M^E is singular")]
    DegeneratePorts,
    #[error("no multiplicative inverse: transformed E meets J")]
    NoInverse,
    #[error("slot {slot} out of range for {n} phases")]
    SlotOutOfRange { slot: usize, n: usize },
    #[error("plug has dim U = {0}, expected 1")]
    PlugNotScalar(usize),
    #[error("phases {0} and {1} cannot be merged")]
    InvalidMerge(usize, usize),
    #[error("subspace is not contained in U")]
    NotSubspaceOfU,
    #[error("extension map T is singular or has the wrong shape")]
    SingularT,
    #[error("transformed E and J intersect")]
    ConditionViolated,
    #[error("basis change is singular or has the wrong shape")]
    SingularG,
    #[error("scaling constants must be nonzero, one pair per phase")]
    InvalidScaling,
    #[error(transparent)]
    Collection(#[from] CollectionError),
}

/// Maps `M^E`, `M^J` from the output ports of the right factor to the input
/// ports of the left factor, as matrices between frame coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PortMaps {
    pub m_e: ComplexMatrix,
    pub m_j: ComplexMatrix,
}

impl PortMaps {
    pub fn new(m_e: ComplexMatrix, m_j: ComplexMatrix, tol: &Tolerance) -> Result<Self, AlgebraError> {
        if !m_e.is_square() || m_e.rows() != m_j.rows() || !m_j.is_square() {
            return Err(AlgebraError::DimensionMismatch("port maps must be square and equal size".into()));
        }
        if !is_nonsingular(&m_e, tol) || !is_nonsingular(&m_j, tol) {
            return Err(AlgebraError::SingularMap);
        }
        Ok(Self { m_e, m_j })
    }

    /// `M^E = M`, `M^J = −M`.
    pub fn from_map(m: ComplexMatrix, tol: &Tolerance) -> Result<Self, AlgebraError> {
        let mj = -&m;
        Self::new(m, mj, tol)
    }

    /// `M^E = I`, `M^J = −I` in frame coordinates.
    pub fn natural(half: usize) -> Self {
        Self {
            m_e: ComplexMatrix::identity(half),
            m_j: -ComplexMatrix::identity(half),
        }
    }

    pub fn dim(&self) -> usize {
        self.m_e.rows()
    }
}

/// Constants `c^E_i`, `c^J_i` of a reference transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingVector {
    pub c_e: Vec<C64>,
    pub c_j: Vec<C64>,
}

impl ScalingVector {
    pub fn new(c_e: Vec<C64>, c_j: Vec<C64>) -> Result<Self, AlgebraError> {
        if c_e.len() != c_j.len() || c_e.iter().chain(&c_j).any(|c| c.norm() == 0.0) {
            return Err(AlgebraError::InvalidScaling);
        }
        Ok(Self { c_e, c_j })
    }

    /// `c^E = d`, `c^J = 1`, so the new function is `Y(d ∘ z)`.
    pub fn ratios(d: &[C64]) -> Result<Self, AlgebraError> {
        Self::new(d.to_vec(), vec![re(1.0); d.len()])
    }

    /// `d_i = c^E_i / c^J_i`.
    pub fn d(&self) -> Vec<C64> {
        self.c_e.iter().zip(&self.c_j).map(|(e, j)| e / j).collect()
    }
}

fn coordinate_block(ambient: usize, start: usize, len: usize) -> Subspace {
    Subspace::coordinate(ambient, &(start..start + len).collect::<Vec<_>>())
}

fn phase_blocks(ambient: usize, offset: usize, dims: &[usize]) -> Vec<Subspace> {
    let mut start = offset;
    dims.iter()
        .map(|&d| {
            let s = coordinate_block(ambient, start, d);
            start += d;
            s
        })
        .collect()
}

/// Places the rows of `parts` at the given offsets of a `rows`-high matrix.
fn place(rows: usize, cols: usize, parts: &[(usize, &ComplexMatrix)]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rows, cols);
    for (r0, p) in parts {
        out.set_block(*r0, 0, p);
    }
    out
}

/// Sum of two `Y` collections whose `V` frames are mapped into a common `V`
/// by `s1`, `s2` (matrices on frame coordinates).
///
/// The result lives on `V ⊕ H' ⊕ H''` with the standard frame on `V` and the
/// phases of `c1` followed by those of `c2`; its function is
/// `s1 Y' s1⁻¹ + s2 Y'' s2⁻¹`.
pub fn add_y(
    c1: &YCollection,
    c2: &YCollection,
    s1: &ComplexMatrix,
    s2: &ComplexMatrix,
) -> Result<YCollection, AlgebraError> {
    let m = c1.m();
    let tol = *c1.tol();
    if c2.m() != m || s1.rows() != m || s1.cols() != m || s2.rows() != m || s2.cols() != m {
        return Err(AlgebraError::DimensionMismatch(format!(
            "dim V' = {m}, dim V'' = {}, maps {}x{} and {}x{}",
            c2.m(),
            s1.rows(),
            s1.cols(),
            s2.rows(),
            s2.cols()
        )));
    }
    if !is_nonsingular(s1, &tol) || !is_nonsingular(s2, &tol) {
        return Err(AlgebraError::SingularMap);
    }
    let (a, b) = (split_coordinates(c1), split_coordinates(c2));
    let (h1, h2) = (c1.k() - m, c2.k() - m);
    let k = m + h1 + h2;

    let (e1, e2) = (c1.e().ortho(), c2.e().ortho());
    let ve1 = s1 * &(&a.v * e1);
    let ve2 = s2 * &(&b.v * e2);
    let constraint = ComplexMatrix::hstack(m, &[&ve1, &-&ve2]);
    let n = null_space(&constraint, &tol);
    let (alpha, beta) = (n.row_range(0, e1.cols()), n.row_range(e1.cols(), e2.cols()));
    let e = place(
        k,
        n.cols(),
        &[(0, &(&ve1 * &alpha)), (m, &(&(&a.h * e1) * &alpha)), (m + h1, &(&(&b.h * e2) * &beta))],
    );

    let (j1, j2) = (c1.j().ortho(), c2.j().ortho());
    let mut j = ComplexMatrix::zeros(k, j1.cols() + j2.cols());
    j.set_block(0, 0, &(s1 * &(&a.v * j1)));
    j.set_block(m, 0, &(&a.h * j1));
    j.set_block(0, j1.cols(), &(s2 * &(&b.v * j2)));
    j.set_block(m + h1, j1.cols(), &(&b.h * j2));

    let mut phases = phase_blocks(k, m, &a.phase_dims);
    phases.extend(phase_blocks(k, m + h1, &b.phase_dims));
    Ok(YCollection::new(
        ComplexMatrix::identity(k).column_range(0, m),
        Subspace::span(&e, &tol),
        Subspace::span(&j, &tol),
        phases,
        &tol,
    )?)
}

/// `K = E = V` of dimension `m` with `J = 0` and `n` zero-dimensional phases.
pub fn additive_zero(m: usize, n: usize, tol: &Tolerance) -> YCollection {
    YCollection::new(
        ComplexMatrix::identity(m),
        Subspace::full(m),
        Subspace::zero(m),
        vec![Subspace::zero(m); n],
        tol,
    )
    .expect("coordinate decomposition")
}

/// Additive inverse: the reference transformation with `c^E = −1`, `c^J = 1`.
pub fn additive_inverse(c: &YCollection) -> Result<YCollection, AlgebraError> {
    reference_transform(c, &ScalingVector::ratios(&vec![re(-1.0); c.n()])?)
}

/// Enlarges `V` to dimension `target` by a space `W` that is also added to `E`.
/// The new function is `Y Ψ` with `Ψ` the projection onto the old `V`.
pub fn embed(c: &YCollection, target: usize) -> Result<YCollection, AlgebraError> {
    let m = c.m();
    if target < m {
        return Err(AlgebraError::DimensionMismatch(format!("cannot embed dim V = {m} into {target}")));
    }
    let w = target - m;
    if w == 0 {
        return Ok(c.clone());
    }
    let k = c.k();
    let kk = k + w;
    let tol = *c.tol();
    let grow = |x: &ComplexMatrix| place(kk, x.cols(), &[(0, x)]);
    let wblock = place(kk, w, &[(k, &ComplexMatrix::identity(w))]);
    let frame = ComplexMatrix::hstack(kk, &[&grow(c.v_frame()), &wblock]);
    let e = ComplexMatrix::hstack(kk, &[&grow(c.e().ortho()), &wblock]);
    Ok(YCollection::new(
        frame,
        Subspace::span(&e, &tol),
        Subspace::span(&grow(c.j().ortho()), &tol),
        c.phases().iter().map(|p| Subspace::span(&grow(p.ortho()), &tol)).collect(),
        &tol,
    )?)
}

/// Product `s1 ×_M s2` of superfunctions with associated function
/// `F = F1 · diag(M^E, M^J) · F2`.
///
/// The output ports of `s2` are wired to the input ports of `s1` through the
/// port maps; the product takes its inputs from `s2` and its outputs from
/// `s1`. Phases of `s1` come first.
pub fn multiply_superfunctions(s1: &Superfunction, s2: &Superfunction, ports: &PortMaps) -> Result<Superfunction, AlgebraError> {
    let half = s1.half();
    if s2.half() != half {
        return Err(AlgebraError::PortMismatch(half, s2.half()));
    }
    if ports.dim() != half {
        return Err(AlgebraError::DimensionMismatch(format!("port maps of size {} for ports of dim {half}", ports.dim())));
    }
    let (c1, c2) = (s1.base(), s2.base());
    let tol = *c1.tol();
    let (l, r) = (split_coordinates(c1), split_coordinates(c2));
    let (h1, h2) = (c1.k() - 2 * half, c2.k() - 2 * half);
    let k = 2 * half + h1 + h2;
    let (off2, off1) = (2 * half, 2 * half + h2);
    let l_in = l.v.row_range(0, half);
    let l_out = l.v.row_range(half, half);
    let r_in = r.v.row_range(0, half);
    let r_out = r.v.row_range(half, half);

    let joined = |x1: &ComplexMatrix, x2: &ComplexMatrix, map: &ComplexMatrix| -> ComplexMatrix {
        let constraint = ComplexMatrix::hstack(half, &[&(&l_in * x1), &-(map * &(&r_out * x2))]);
        let n = null_space(&constraint, &tol);
        let a = x1 * &n.row_range(0, x1.cols());
        let b = x2 * &n.row_range(x1.cols(), x2.cols());
        place(
            k,
            n.cols(),
            &[(0, &(&r_in * &b)), (half, &(&l_out * &a)), (off2, &(&r.h * &b)), (off1, &(&l.h * &a))],
        )
    };
    let e = joined(c1.e().ortho(), c2.e().ortho(), &ports.m_e);
    let j = joined(c1.j().ortho(), c2.j().ortho(), &ports.m_j);
    let (e, j) = (Subspace::span(&e, &tol), Subspace::span(&j, &tol));
    if e.dim() + j.dim() != k || intersect(&e, &j, &tol).dim() != 0 {
        return Err(AlgebraError::CouplingSingular);
    }
    let mut phases = phase_blocks(k, off1, &l.phase_dims);
    phases.extend(phase_blocks(k, off2, &r.phase_dims));
    let id = ComplexMatrix::identity(k);
    Ok(Superfunction::new(id.column_range(0, half), id.column_range(half, half), e, j, phases, &tol)?)
}

/// Superfunction with empty `H` and `F = diag((M^E)⁻¹, (M^J)⁻¹)`; the
/// multiplicative identity for products taken with `ports`.
pub fn identity_superfunction(ports: &PortMaps, tol: &Tolerance) -> Result<Superfunction, AlgebraError> {
    let m = ports.dim();
    if !is_nonsingular(&(&ports.m_j - &ports.m_e), tol) {
        return Err(AlgebraError::DegeneratePorts);
    }
    let me_inv = inverse(&ports.m_e, tol).map_err(|_| AlgebraError::SingularMap)?;
    let mj_inv = inverse(&ports.m_j, tol).map_err(|_| AlgebraError::SingularMap)?;
    let id = ComplexMatrix::identity(m);
    let e = ComplexMatrix::vstack(m, &[&id, &me_inv]);
    let j = ComplexMatrix::vstack(m, &[&id, &mj_inv]);
    let full = ComplexMatrix::identity(2 * m);
    Ok(Superfunction::new(
        full.column_range(0, m),
        full.column_range(m, m),
        Subspace::span(&e, tol),
        Subspace::span(&j, tol),
        vec![],
        tol,
    )?)
}

/// Multiplicative inverse of a superfunction.
///
/// Input and output ports swap, `J` is kept and `E` is replaced by
/// `(Π1 − Π2)E`. The product of `s` with the result (in either order) under
/// [`PortMaps::natural`] has `F = diag(I, −I)`; the inverse has
/// `F'' = D F⁻¹ D` with `D = diag(I, −I)`.
pub fn multiplicative_inverse(s: &Superfunction) -> Result<(Superfunction, PortMaps), AlgebraError> {
    let c = s.base();
    let tol = *c.tol();
    let k = c.k();
    let psi = &c.pi1().scale(re(2.0)) - &ComplexMatrix::identity(k);
    let e = image(&psi, c.e(), &tol);
    if e.dim() + c.j().dim() != k || intersect(&e, c.j(), &tol).dim() != 0 {
        return Err(AlgebraError::NoInverse);
    }
    let inv = Superfunction::new(s.v_out_frame(), s.v_in_frame(), e, c.j().clone(), c.phases().to_vec(), &tol)?;
    Ok((inv, PortMaps::natural(s.half())))
}

fn check_plug(plug: &ZCollection) -> Result<(), AlgebraError> {
    if plug.m() != 1 {
        return Err(AlgebraError::PlugNotScalar(plug.m()));
    }
    Ok(())
}

/// Spaces of a substitution on the ambient `K ⊕ (P_slot ⊗ E') ⊕ (P_slot ⊗ J')`.
struct Substituted {
    ambient: usize,
    host_dim: usize,
    e: Subspace,
    j: Subspace,
    phases: Vec<Subspace>,
}

impl Substituted {
    fn lift(&self, x: &ComplexMatrix) -> ComplexMatrix {
        place(self.ambient, x.cols(), &[(0, x)])
    }

    fn build(
        k: usize,
        e: &Subspace,
        j: &Subspace,
        phases: &[Subspace],
        slot: usize,
        plug: &ZCollection,
        tol: &Tolerance,
    ) -> Result<Self, AlgebraError> {
        check_plug(plug)?;
        if slot >= phases.len() {
            return Err(AlgebraError::SlotOutOfRange { slot, n: phases.len() });
        }
        let b = phases[slot].ortho();
        let p1 = b.cols();
        let (pe, pj) = (plug.e().ortho(), plug.j().ortho());
        let (de, dj) = (pe.cols(), pj.cols());
        let ambient = k + p1 * (de + dj);
        let (off_e, off_j) = (k, k + p1 * de);
        let this = |ee: Subspace, jj: Subspace, ph: Vec<Subspace>| Self {
            ambient,
            host_dim: k,
            e: ee,
            j: jj,
            phases: ph,
        };
        let lift = |x: &ComplexMatrix| place(ambient, x.cols(), &[(0, x)]);

        let e_new = ComplexMatrix::hstack(
            ambient,
            &[&lift(e.ortho()), &place(ambient, p1 * de, &[(off_e, &ComplexMatrix::identity(p1 * de))])],
        );
        let j_new = ComplexMatrix::hstack(
            ambient,
            &[&lift(j.ortho()), &place(ambient, p1 * dj, &[(off_j, &ComplexMatrix::identity(p1 * dj))])],
        );

        // Components of the plug phases along u', E' and J'.
        let alpha = plug.u_coords();
        let eps = &pe.adjoint() * plug.gamma1();
        let iota = &pj.adjoint() * plug.gamma2();
        let mut new_phases = Vec::with_capacity(phases.len() - 1 + plug.n());
        for q in plug.phases() {
            let qo = q.ortho();
            let (qa, qe, qi) = (alpha * qo, &eps * qo, &iota * qo);
            let mut basis = ComplexMatrix::zeros(ambient, p1 * qo.cols());
            for a in 0..p1 {
                let mut ea = ComplexMatrix::zeros(p1, 1);
                ea[(a, 0)] = re(1.0);
                for col in 0..qo.cols() {
                    let idx = a * qo.cols() + col;
                    let top = b.column_range(a, 1).scale(qa[(0, col)]);
                    basis.set_block(0, idx, &top);
                    basis.set_block(off_e, idx, &ea.kron(&qe.column_range(col, 1)));
                    basis.set_block(off_j, idx, &ea.kron(&qi.column_range(col, 1)));
                }
            }
            new_phases.push(Subspace::span(&basis, tol));
        }
        for (i, p) in phases.iter().enumerate() {
            if i != slot {
                new_phases.push(Subspace::span(&lift(p.ortho()), tol));
            }
        }
        Ok(this(Subspace::span(&e_new, tol), Subspace::span(&j_new, tol), new_phases))
    }
}

/// Substitutes the scalar function of `plug` for variable `slot` of `host`.
///
/// The variables of the result are the plug's, followed by the host's other
/// variables in their original order.
pub fn substitute_into_y(host: &YCollection, plug: &ZCollection, slot: usize) -> Result<YCollection, AlgebraError> {
    let tol = *host.tol();
    let s = Substituted::build(host.k(), host.e(), host.j(), host.phases(), slot, plug, &tol)?;
    debug_assert_eq!(s.host_dim, host.k());
    Ok(YCollection::new(s.lift(host.v_frame()), s.e.clone(), s.j.clone(), s.phases.clone(), &tol)?)
}

/// `Z` counterpart of [`substitute_into_y`], with `U'' = U ⊗ U'`.
pub fn substitute_into_z(host: &ZCollection, plug: &ZCollection, slot: usize) -> Result<ZCollection, AlgebraError> {
    let tol = *host.tol();
    let s = Substituted::build(host.h(), host.e(), host.j(), host.phases(), slot, plug, &tol)?;
    Ok(ZCollection::new(s.lift(host.u_frame()), s.e.clone(), s.j.clone(), s.phases.clone(), &tol)?)
}

/// Interchanges `E` and `J`: `Z(z) ↦ Z(1/z)⁻¹`.
pub fn duality_z(c: &ZCollection) -> Result<ZCollection, AlgebraError> {
    Ok(ZCollection::new(c.u_frame().clone(), c.j().clone(), c.e().clone(), c.phases().to_vec(), c.tol())?)
}

/// Interchanges `E` and `J`: `Y(z) ↦ Y(1/z)⁻¹`.
pub fn duality_y(c: &YCollection) -> Result<YCollection, AlgebraError> {
    Ok(YCollection::new(c.v_frame().clone(), c.j().clone(), c.e().clone(), c.phases().to_vec(), c.tol())?)
}

fn merged(phases: &[Subspace], i: usize, j: usize, tol: &Tolerance) -> Result<Vec<Subspace>, AlgebraError> {
    let n = phases.len();
    if i == j || i >= n || j >= n {
        return Err(AlgebraError::InvalidMerge(i, j));
    }
    let (lo, hi) = (i.min(j), i.max(j));
    let mut out = phases.to_vec();
    out[lo] = phases[lo].sum(&phases[hi], tol);
    out.remove(hi);
    Ok(out)
}

/// Replaces `P_i ⊕ P_j` by a single phase at position `min(i, j)`.
pub fn merge_phases_z(c: &ZCollection, i: usize, j: usize) -> Result<ZCollection, AlgebraError> {
    let phases = merged(c.phases(), i, j, c.tol())?;
    Ok(ZCollection::new(c.u_frame().clone(), c.e().clone(), c.j().clone(), phases, c.tol())?)
}

/// Replaces `P_i ⊕ P_j` by a single phase at position `min(i, j)`.
pub fn merge_phases_y(c: &YCollection, i: usize, j: usize) -> Result<YCollection, AlgebraError> {
    let phases = merged(c.phases(), i, j, c.tol())?;
    Ok(YCollection::new(c.v_frame().clone(), c.e().clone(), c.j().clone(), phases, c.tol())?)
}

/// Restricts the function to `U' = span(u_sub)` with `U = U' ⊕ W` and
/// `J' = J ⊕ W`; the new function is `Φ Z` on `U'` in the frame `u_sub`.
///
/// Without `w`, the complement is made of frame vectors of `U`.
pub fn project_u(c: &ZCollection, u_sub: &ComplexMatrix, w: Option<&ComplexMatrix>) -> Result<ZCollection, AlgebraError> {
    let tol = *c.tol();
    let h = c.h();
    if u_sub.rows() != h {
        return Err(AlgebraError::DimensionMismatch(format!("vectors of length {} in C^{h}", u_sub.rows())));
    }
    let sub = Subspace::span(u_sub, &tol);
    if sub.dim() != u_sub.cols() || !c.u().contains(&sub, &tol) {
        return Err(AlgebraError::NotSubspaceOfU);
    }
    let w = match w {
        Some(w) => w.clone(),
        None => {
            let mut picked = u_sub.clone();
            let mut cols = Vec::new();
            for v in c.u_frame().column_vectors() {
                let trial = ComplexMatrix::hstack(h, &[&picked, &ComplexMatrix::column_vector(&v)]);
                if rank(&trial, &tol) == trial.cols() {
                    picked = trial;
                    cols.push(v);
                }
            }
            ComplexMatrix::from_columns(h, &cols)
        }
    };
    let ws = Subspace::span(&w, &tol);
    if !c.u().contains(&ws, &tol) || ws.dim() + sub.dim() != c.m() {
        return Err(AlgebraError::NotSubspaceOfU);
    }
    Ok(ZCollection::new(u_sub.clone(), c.e().clone(), c.j().sum(&ws, &tol), c.phases().to_vec(), &tol)?)
}

/// Extension of a `Z` collection to a `Y` collection on `V ⊕ H`.
///
/// `t` maps frame coordinates of `U` to coordinates of `V = C^m`. The frame
/// of `V` is `{T u_i}`, in which the new function equals `Z`; in the
/// standard basis of `V` it is `T Z T⁻¹`.
pub fn extension(c: &ZCollection, t: &ComplexMatrix) -> Result<YCollection, AlgebraError> {
    let tol = *c.tol();
    let (m, h) = (c.m(), c.h());
    if t.rows() != m || t.cols() != m || !is_nonsingular(t, &tol) {
        return Err(AlgebraError::SingularT);
    }
    let k = m + h;
    let lift = |x: &ComplexMatrix| place(k, x.cols(), &[(m, x)]);
    let e_tilde = ComplexMatrix::vstack(m, &[t, c.u_frame()]);
    let j_tilde = ComplexMatrix::vstack(m, &[&-t, c.u_frame()]);
    let e = ComplexMatrix::hstack(k, &[&e_tilde, &lift(c.e().ortho())]);
    let j = ComplexMatrix::hstack(k, &[&j_tilde, &lift(c.j().ortho())]);
    Ok(YCollection::new(
        place(k, m, &[(0, t)]),
        Subspace::span(&e, &tol),
        Subspace::span(&j, &tol),
        c.phases().iter().map(|p| Subspace::span(&lift(p.ortho()), &tol)).collect(),
        &tol,
    )?)
}

/// Reference transformation: `E' = ψ^E(E)`, `J' = ψ^J(J)` with
/// `ψ = Π1 + Σ c_i Λ_i`; the new function is `Y(d ∘ z)`, `d = c^E / c^J`.
pub fn reference_transform(c: &YCollection, s: &ScalingVector) -> Result<YCollection, AlgebraError> {
    if s.c_e.len() != c.n() {
        return Err(AlgebraError::InvalidScaling);
    }
    let tol = *c.tol();
    let psi = |w: &[C64]| {
        let mut op = c.pi1().clone();
        for (lam, wi) in c.lambdas().iter().zip(w) {
            op += &lam.scale(*wi);
        }
        op
    };
    let e = image(&psi(&s.c_e), c.e(), &tol);
    let j = image(&psi(&s.c_j), c.j(), &tol);
    if e.dim() + j.dim() != c.k() || intersect(&e, &j, &tol).dim() != 0 {
        return Err(AlgebraError::ConditionViolated);
    }
    Ok(YCollection::new(c.v_frame().clone(), e, j, c.phases().to_vec(), &tol)?)
}

fn check_g(g: &ComplexMatrix, dim: usize, tol: &Tolerance) -> Result<(), AlgebraError> {
    if g.rows() != dim || g.cols() != dim || !is_nonsingular(g, tol) {
        return Err(AlgebraError::SingularG);
    }
    Ok(())
}

/// Maps every space and frame through `g`; the function is unchanged.
pub fn basis_change_z(c: &ZCollection, g: &ComplexMatrix) -> Result<ZCollection, AlgebraError> {
    let tol = *c.tol();
    check_g(g, c.h(), &tol)?;
    Ok(ZCollection::new(
        g * c.u_frame(),
        c.e().map(g, &tol),
        c.j().map(g, &tol),
        c.phases().iter().map(|p| p.map(g, &tol)).collect(),
        &tol,
    )?)
}

/// Maps every space and frame through `g`; the function is unchanged.
pub fn basis_change_y(c: &YCollection, g: &ComplexMatrix) -> Result<YCollection, AlgebraError> {
    let tol = *c.tol();
    check_g(g, c.k(), &tol)?;
    Ok(YCollection::new(
        g * c.v_frame(),
        c.e().map(g, &tol),
        c.j().map(g, &tol),
        c.phases().iter().map(|p| p.map(g, &tol)).collect(),
        &tol,
    )?)
}

/// Maps every space and both port frames through `g`.
pub fn basis_change_super(s: &Superfunction, g: &ComplexMatrix) -> Result<Superfunction, AlgebraError> {
    Ok(Superfunction::from_base(basis_change_y(s.base(), g)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{one_dim_y, z2_collection};
    use crate::numcore::c64;
    use crate::random;
    use crate::solvers::{annulus_point, eval_f, eval_y, eval_z, f_port_system};
    use rand::Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64) -> bool {
        a.max_abs_diff(b) < eps * (1.0 + a.max_abs().max(b.max_abs()))
    }

    fn concat(a: &[C64], b: &[C64]) -> Vec<C64> {
        a.iter().chain(b).copied().collect()
    }

    #[test]
    fn addition_laws() {
        let t = tol();
        let mut g = random::rng(21);
        for _ in 0..10 {
            let a = random::y_collection(&mut g, 2, 3, &[2, 2]);
            let b = random::y_collection(&mut g, 2, 2, &[1, 3]);
            let s1 = random::matrix(&mut g, 2, 2);
            let s2 = random::matrix(&mut g, 2, 2);
            let sum = add_y(&a, &b, &s1, &s2).unwrap();
            assert_eq!(sum.n(), 4);
            let (za, zb) = (annulus_point(&mut g, 2), annulus_point(&mut g, 2));
            let ya = eval_y(&a, &za).unwrap();
            let yb = eval_y(&b, &zb).unwrap();
            let expect = &s1 * &(&ya * &inverse(&s1, &t).unwrap()) + &s2 * &(&yb * &inverse(&s2, &t).unwrap());
            assert!(close(&eval_y(&sum, &concat(&za, &zb)).unwrap(), &expect, 1e-8));
        }
    }

    #[test]
    fn additive_zero_and_inverse() {
        let t = tol();
        let mut g = random::rng(22);
        let id = ComplexMatrix::identity(2);
        let a = random::y_collection(&mut g, 2, 3, &[2, 2]);
        let zero = additive_zero(2, 2, &t);
        let z4 = annulus_point(&mut g, 4);
        assert!(eval_y(&zero, &z4[..2]).unwrap().max_abs() < 1e-14);
        let with_zero = add_y(&a, &zero, &id, &id).unwrap();
        let y = eval_y(&with_zero, &z4).unwrap();
        assert!(close(&y, &eval_y(&a, &z4[..2]).unwrap(), 1e-10));

        let neg = additive_inverse(&a).unwrap();
        let diff = merge_phases_y(&merge_phases_y(&add_y(&a, &neg, &id, &id).unwrap(), 1, 3).unwrap(), 0, 2).unwrap();
        for _ in 0..20 {
            let z = annulus_point(&mut g, 2);
            assert!(eval_y(&diff, &z).unwrap().max_abs() < 1e-8);
        }
    }

    #[test]
    fn sum_of_linear_functions() {
        let t = tol();
        let id = ComplexMatrix::identity(1);
        let a = one_dim_y(&[re(1.0), re(0.5)], &[re(1.0), re(0.0)], &t).unwrap();
        let b = one_dim_y(&[re(0.3), re(1.0)], &[re(0.0), re(1.0)], &t).unwrap();
        let sum = add_y(&a, &b, &id, &id).unwrap();
        let sum = merge_phases_y(&merge_phases_y(&sum, 1, 3).unwrap(), 0, 2).unwrap();
        let z = [c64(0.4, 1.0), c64(-1.2, 0.3)];
        let y = eval_y(&sum, &z).unwrap()[(0, 0)];
        assert!((y - (z[0] + z[1])).norm() < 1e-12);
    }

    #[test]
    fn addition_is_associative_and_commutative() {
        let mut g = random::rng(23);
        let id = ComplexMatrix::identity(2);
        let a = random::y_collection(&mut g, 2, 2, &[2]);
        let b = random::y_collection(&mut g, 2, 3, &[3]);
        let c = random::y_collection(&mut g, 2, 2, &[1]);
        let left = add_y(&add_y(&a, &b, &id, &id).unwrap(), &c, &id, &id).unwrap();
        let right = add_y(&a, &add_y(&b, &c, &id, &id).unwrap(), &id, &id).unwrap();
        let swapped = add_y(&b, &a, &id, &id).unwrap();
        let ab = add_y(&a, &b, &id, &id).unwrap();
        for _ in 0..20 {
            let z = annulus_point(&mut g, 3);
            let l = eval_y(&left, &z).unwrap();
            assert!(close(&l, &eval_y(&right, &z).unwrap(), 1e-8));
            let x = eval_y(&ab, &z[..2]).unwrap();
            assert!(close(&x, &eval_y(&swapped, &[z[1], z[0]]).unwrap(), 1e-8));
        }
    }

    #[test]
    fn embedding() {
        let t = tol();
        let mut g = random::rng(24);
        let a = one_dim_y(&[re(1.0), re(0.5)], &[re(1.0), re(0.0)], &t).unwrap();
        assert_eq!(embed(&a, 1).unwrap().k(), a.k());
        let big = embed(&a, 2).unwrap();
        let z = [c64(0.7, 0.2), c64(1.1, -0.4)];
        let y = eval_y(&big, &z).unwrap();
        let expect = ComplexMatrix::diagonal(&[z[0], re(0.0)]);
        assert!(close(&y, &expect, 1e-12));

        let full = random::y_collection(&mut g, 2, 3, &[2, 2]);
        let id = ComplexMatrix::identity(2);
        let sum = add_y(&big, &full, &id, &id).unwrap();
        let w = annulus_point(&mut g, 2);
        let s = eval_y(&sum, &concat(&z, &w)).unwrap();
        let expect = &eval_y(&full, &w).unwrap() + &expect;
        assert!(close(&s, &expect, 1e-9));
    }

    fn random_ports<R: Rng>(g: &mut R, half: usize) -> PortMaps {
        PortMaps::new(random::matrix(g, half, half), random::matrix(g, half, half), &tol()).unwrap()
    }

    #[test]
    fn product_rule() {
        let t = tol();
        let mut g = random::rng(25);
        for _ in 0..5 {
            let s1 = random::superfunction(&mut g, 1, 2, &[2]);
            let s2 = random::superfunction(&mut g, 1, 3, &[1, 2]);
            let ports = random_ports(&mut g, 1);
            let p = multiply_superfunctions(&s1, &s2, &ports).unwrap();
            assert_eq!(p.base().e().dim(), s1.base().e().dim() + s2.base().e().dim() - 1);
            assert_eq!(p.base().j().dim(), s1.base().j().dim() + s2.base().j().dim() - 1);
            for _ in 0..20 {
                let z = annulus_point(&mut g, 3);
                let f1 = eval_f(&s1, &z[..1]).unwrap();
                let f2 = eval_f(&s2, &z[1..]).unwrap();
                let m = ComplexMatrix::block_diag(&[&ports.m_e, &ports.m_j]);
                let expect = &f1 * &(&m * &f2);
                assert!(close(&eval_f(&p, &z).unwrap(), &expect, 1e-8));
            }
        }
        let s = random::superfunction(&mut g, 2, 4, &[3, 3]);
        let ports = random_ports(&mut g, 2);
        let id = identity_superfunction(&ports, &t).unwrap();
        let p = multiply_superfunctions(&s, &id, &ports).unwrap();
        let z = annulus_point(&mut g, 2);
        assert!(close(&eval_f(&p, &z).unwrap(), &eval_f(&s, &z).unwrap(), 1e-8));
        let bad = random::superfunction(&mut g, 1, 2, &[2]);
        assert_eq!(
            multiply_superfunctions(&s, &bad, &ports).unwrap_err(),
            AlgebraError::PortMismatch(2, 1)
        );
    }

    #[test]
    fn identity_superfunctions() {
        let t = tol();
        let id = identity_superfunction(&PortMaps::natural(2), &t).unwrap();
        let f = f_port_system(&id, &[]).unwrap();
        let expect = ComplexMatrix::diagonal(&[re(1.0), re(1.0), re(-1.0), re(-1.0)]);
        assert!(close(&f, &expect, 1e-12));
        let ports = PortMaps::new(ComplexMatrix::scalar(re(2.0)), ComplexMatrix::scalar(re(-2.0)), &t).unwrap();
        let f = eval_f(&identity_superfunction(&ports, &t).unwrap(), &[]).unwrap();
        assert!(close(&f, &ComplexMatrix::diagonal(&[re(0.5), re(-0.5)]), 1e-12));
        let same = PortMaps::new(ComplexMatrix::scalar(re(2.0)), ComplexMatrix::scalar(re(2.0)), &t).unwrap();
        assert_eq!(identity_superfunction(&same, &t).unwrap_err(), AlgebraError::DegeneratePorts);
    }

    #[test]
    fn multiplicative_inverses() {
        let t = tol();
        let mut g = random::rng(26);
        let s = random::superfunction(&mut g, 1, 2, &[2]);
        let (inv, ports) = multiplicative_inverse(&s).unwrap();
        let left = multiply_superfunctions(&s, &inv, &ports).unwrap();
        let right = multiply_superfunctions(&inv, &s, &ports).unwrap();
        let d = ComplexMatrix::diagonal(&[re(1.0), re(-1.0)]);
        let (back, _) = multiplicative_inverse(&inv).unwrap();
        for _ in 0..10 {
            let z = annulus_point(&mut g, 1);
            let zz = [z[0], z[0]];
            assert!(close(&eval_f(&left, &zz).unwrap(), &d, 1e-8));
            assert!(close(&eval_f(&right, &zz).unwrap(), &d, 1e-8));
            assert!(close(&eval_f(&back, &z).unwrap(), &eval_f(&s, &z).unwrap(), 1e-8));
        }

        // Put ψ(j) into E for some j ∈ J.
        let c = s.base();
        let psi = &c.pi1().scale(re(2.0)) - &ComplexMatrix::identity(c.k());
        let j0 = c.j().ortho().column_range(0, 1);
        let e_bad = ComplexMatrix::hstack(c.k(), &[&(&psi * &j0), &random::matrix(&mut g, c.k(), c.e().dim() - 1)]);
        let bad = Superfunction::new(
            s.v_in_frame(),
            s.v_out_frame(),
            Subspace::span(&e_bad, &t),
            c.j().clone(),
            c.phases().to_vec(),
            &t,
        )
        .unwrap();
        assert_eq!(multiplicative_inverse(&bad).unwrap_err(), AlgebraError::NoInverse);
    }

    #[test]
    fn substitution_golden() {
        let t = tol();
        let host = one_dim_y(&[re(1.0)], &[re(1.0)], &t).unwrap();
        let square = z2_collection([re(-1.0), re(1.0), re(1.0)], [re(1.0); 3], &t).unwrap();
        let s = substitute_into_y(&host, &square, 0).unwrap();
        let z = [c64(0.6, 0.8), c64(1.3, -0.2)];
        let y = eval_y(&s, &z).unwrap()[(0, 0)];
        assert!((y - z[0] * z[0] / z[1]).norm() < 1e-10);

        let cc = re(0.3);
        let avg = z2_collection([re(1.0) - cc, re(0.0), cc], [re(1.0); 3], &t).unwrap();
        let s = substitute_into_z(&avg, &square, 0).unwrap();
        let w = [z[0], z[1], c64(0.9, 0.5)];
        let v = eval_z(&s, &w).unwrap()[(0, 0)];
        assert!((v - (cc * w[0] * w[0] / w[1] + (re(1.0) - cc) * w[2])).norm() < 1e-10);

        assert_eq!(
            substitute_into_y(&host, &square, 1).unwrap_err(),
            AlgebraError::SlotOutOfRange { slot: 1, n: 1 }
        );
        let mut g = random::rng(2);
        let wide = random::z_collection(&mut g, 2, 1, &[2, 2]);
        assert_eq!(substitute_into_y(&host, &wide, 0).unwrap_err(), AlgebraError::PlugNotScalar(2));
    }

    #[test]
    fn substitution_law() {
        let mut g = random::rng(27);
        for slot in 0..2 {
            let host = random::y_collection(&mut g, 2, 3, &[2, 2]);
            let plug = random::z_collection(&mut g, 1, 2, &[2, 2]);
            let hz = random::z_collection(&mut g, 2, 2, &[2, 3]);
            let sy = substitute_into_y(&host, &plug, slot).unwrap();
            let sz = substitute_into_z(&hz, &plug, slot).unwrap();
            for _ in 0..20 {
                let zp = annulus_point(&mut g, 2);
                let other = annulus_point(&mut g, 1)[0];
                let inner = eval_z(&plug, &zp).unwrap()[(0, 0)];
                let mut hostz = vec![other; 2];
                hostz[slot] = inner;
                let args = [zp[0], zp[1], other];
                let y = eval_y(&sy, &args).unwrap();
                assert!(close(&y, &eval_y(&host, &hostz).unwrap(), 1e-8));
                let z = eval_z(&sz, &args).unwrap();
                assert!(close(&z, &eval_z(&hz, &hostz).unwrap(), 1e-8));
            }
        }
    }

    #[test]
    fn nested_substitution_is_associative() {
        let mut g = random::rng(28);
        let a = random::z_collection(&mut g, 1, 1, &[2, 1]);
        let b = random::z_collection(&mut g, 1, 1, &[1, 2]);
        let c = random::z_collection(&mut g, 1, 2, &[2, 2]);
        let ab_c = substitute_into_z(&substitute_into_z(&a, &b, 0).unwrap(), &c, 0).unwrap();
        let a_bc = substitute_into_z(&a, &substitute_into_z(&b, &c, 0).unwrap(), 0).unwrap();
        for _ in 0..20 {
            let z = annulus_point(&mut g, 4);
            assert!(close(&eval_z(&ab_c, &z).unwrap(), &eval_z(&a_bc, &z).unwrap(), 1e-8));
        }
    }

    #[test]
    fn duality_laws() {
        let t = tol();
        let mut g = random::rng(29);
        let c = random::z_collection(&mut g, 2, 2, &[2, 3]);
        let d = duality_z(&c).unwrap();
        let dd = duality_z(&d).unwrap();
        assert!(dd.e().canonical_distance(c.e()) < 1e-12);
        assert!(dd.j().canonical_distance(c.j()) < 1e-12);
        let y = random::y_collection(&mut g, 2, 3, &[2, 2]);
        let dy = duality_y(&y).unwrap();
        for _ in 0..20 {
            let z = annulus_point(&mut g, 2);
            let zi: Vec<C64> = z.iter().map(|x| x.inv()).collect();
            let prod = eval_z(&d, &z).unwrap() * eval_z(&c, &zi).unwrap();
            assert!(close(&prod, &ComplexMatrix::identity(2), 1e-8));
            let prod = eval_y(&dy, &z).unwrap() * eval_y(&y, &zi).unwrap();
            assert!(close(&prod, &ComplexMatrix::identity(2), 1e-8));
        }
        let cc = re(0.25);
        let avg = z2_collection([re(1.0) - cc, re(0.0), cc], [re(1.0); 3], &t).unwrap();
        let z = [c64(0.5, 0.5), c64(1.5, -0.1)];
        let v = eval_z(&duality_z(&avg).unwrap(), &z).unwrap()[(0, 0)];
        assert!((v - (cc / z[0] + (re(1.0) - cc) / z[1]).inv()).norm() < 1e-10);
        let sq = z2_collection([re(-1.0), re(1.0), re(1.0)], [re(1.0); 3], &t).unwrap();
        let v = eval_z(&duality_z(&sq).unwrap(), &z).unwrap()[(0, 0)];
        assert!((v - z[0] * z[0] / z[1]).norm() < 1e-10);
    }

    #[test]
    fn merging_phases() {
        let mut g = random::rng(30);
        let c = random::y_collection(&mut g, 1, 2, &[1, 2, 2]);
        let m01 = merge_phases_y(&c, 1, 0).unwrap();
        let three = merge_phases_y(&m01, 0, 1).unwrap();
        let other = merge_phases_y(&merge_phases_y(&c, 2, 1).unwrap(), 0, 1).unwrap();
        for _ in 0..10 {
            let z = annulus_point(&mut g, 2);
            let full = eval_y(&c, &[z[0], z[0], z[1]]).unwrap();
            assert!(close(&eval_y(&m01, &z).unwrap(), &full, 1e-9));
            let all = eval_y(&c, &[z[0]; 3]).unwrap();
            assert!(close(&eval_y(&three, &z[..1]).unwrap(), &all, 1e-9));
            assert!(close(&eval_y(&other, &z[..1]).unwrap(), &all, 1e-9));
        }
        assert_eq!(merge_phases_y(&c, 1, 1).unwrap_err(), AlgebraError::InvalidMerge(1, 1));
    }

    #[test]
    fn projection_onto_part_of_u() {
        let t = tol();
        let mut g = random::rng(31);
        let c = random::z_collection(&mut g, 2, 2, &[3, 3]);
        let same = project_u(&c, c.u_frame(), None).unwrap();
        let first = project_u(&c, &c.u_frame().column_range(0, 1), None).unwrap();
        for _ in 0..10 {
            let z = annulus_point(&mut g, 2);
            let full = eval_z(&c, &z).unwrap();
            assert!(close(&eval_z(&same, &z).unwrap(), &full, 1e-9));
            assert!((eval_z(&first, &z).unwrap()[(0, 0)] - full[(0, 0)]).norm() < 1e-9 * (1.0 + full.max_abs()));
        }
        let empty = project_u(&c, &ComplexMatrix::zeros(6, 0), None).unwrap();
        assert!(!empty.validate(&t).check("u_nonzero").unwrap().passed);
        let outside = c.e().ortho().column_range(0, 1);
        assert_eq!(project_u(&c, &outside, None).unwrap_err(), AlgebraError::NotSubspaceOfU);
    }

    #[test]
    fn extension_conjugates() {
        let mut g = random::rng(32);
        let c1 = random::z_collection(&mut g, 1, 1, &[2, 2]);
        let y1 = extension(&c1, &ComplexMatrix::identity(1)).unwrap();
        let c = random::z_collection(&mut g, 2, 2, &[2, 3]);
        let y2 = extension(&c, &ComplexMatrix::identity(2).scale(re(2.0))).unwrap();
        let tm = random::matrix(&mut g, 2, 2);
        let yt = extension(&c, &tm).unwrap();
        let std = yt.with_v_frame(ComplexMatrix::identity(7).column_range(0, 2)).unwrap();
        let tinv = inverse(&tm, &tol()).unwrap();
        for _ in 0..10 {
            let z = annulus_point(&mut g, 2);
            assert!(close(&eval_y(&y1, &z).unwrap(), &eval_z(&c1, &z).unwrap(), 1e-9));
            let zc = eval_z(&c, &z).unwrap();
            assert!(close(&eval_y(&y2, &z).unwrap(), &zc, 1e-9));
            assert!(close(&eval_y(&yt, &z).unwrap(), &zc, 1e-9));
            assert!(close(&eval_y(&std, &z).unwrap(), &(&tm * &(&zc * &tinv)), 1e-8));
        }
        assert_eq!(extension(&c, &ComplexMatrix::zeros(2, 2)).unwrap_err(), AlgebraError::SingularT);
    }

    #[test]
    fn reference_transforms() {
        let t = tol();
        let mut g = random::rng(33);
        let c = random::y_collection(&mut g, 2, 3, &[2, 2]);
        let same = reference_transform(&c, &ScalingVector::new(vec![c64(2.0, 1.0), re(-3.0)], vec![c64(2.0, 1.0), re(-3.0)]).unwrap()).unwrap();
        let neg = reference_transform(&c, &ScalingVector::new(vec![re(-2.0); 2], vec![re(2.0); 2]).unwrap()).unwrap();
        for _ in 0..10 {
            let z = annulus_point(&mut g, 2);
            let y = eval_y(&c, &z).unwrap();
            assert!(close(&eval_y(&same, &z).unwrap(), &y, 1e-9));
            assert!(close(&eval_y(&neg, &z).unwrap(), &-&y, 1e-9));
        }
        let lin = one_dim_y(&[re(1.0), re(0.5)], &[re(1.0), re(0.0)], &t).unwrap();
        let scaled = reference_transform(&lin, &ScalingVector::ratios(&[re(2.0), re(1.0)]).unwrap()).unwrap();
        let z = [c64(0.3, 0.7), re(1.1)];
        assert!((eval_y(&scaled, &z).unwrap()[(0, 0)] - z[0] * 2.0).norm() < 1e-12);
        assert_eq!(ScalingVector::new(vec![re(0.0)], vec![re(1.0)]).unwrap_err(), AlgebraError::InvalidScaling);

        // Y(1) = A with eigenvalue 1 makes d = −1 collide.
        let a = ComplexMatrix::diagonal(&[re(1.0), re(0.5)]);
        let bad = crate::atoms::linear_y(&a, &t).unwrap();
        assert_eq!(additive_inverse(&bad).unwrap_err(), AlgebraError::ConditionViolated);
    }

    #[test]
    fn basis_change_invariance() {
        let mut g = random::rng(34);
        let c = random::z_collection(&mut g, 2, 2, &[2, 3]);
        let y = random::y_collection(&mut g, 2, 3, &[2, 2]);
        for _ in 0..100 {
            let gz = random::matrix(&mut g, 5, 5);
            let gy = random::matrix(&mut g, 6, 6);
            let cz = basis_change_z(&c, &gz).unwrap();
            let cy = basis_change_y(&y, &gy).unwrap();
            let z = annulus_point(&mut g, 2);
            assert!(close(&eval_z(&cz, &z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-9));
            assert!(close(&eval_y(&cy, &z).unwrap(), &eval_y(&y, &z).unwrap(), 1e-9));
        }
        let perm = ComplexMatrix::from_fn(5, 5, |i, j| if j == (i + 1) % 5 { re(1.0) } else { re(0.0) });
        let p = basis_change_z(&c, &perm).unwrap();
        let z = annulus_point(&mut g, 2);
        assert!(close(&eval_z(&p, &z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-10));
        let same = basis_change_z(&c, &ComplexMatrix::identity(5)).unwrap();
        assert!(same.e().canonical_distance(c.e()) < 1e-12);
        assert_eq!(basis_change_z(&c, &ComplexMatrix::zeros(5, 5)).unwrap_err(), AlgebraError::SingularG);
    }
}
