//! Z(n) and Y(n) subspace collections, superfunctions, and the operator `L(z)`.
//!
//! Each collection stores its spaces together with the projectors induced by
//! its two decompositions. The "frame" of `U` (or `V`) is a chosen basis in
//! which the associated matrix function is expressed; it is kept separately
//! from the canonical basis so that operations can control it.

use std::fmt;

use thiserror::Error;

use crate::numcore::{inverse, rank, ComplexMatrix, Tolerance, C64};
use crate::spaces::{intersect, DirectSum, SpaceError, Subspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollectionError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("frame of {rows}x{cols} does not have full column rank")]
    FrameRankDeficient { rows: usize, cols: usize },
    #[error("a Z collection needs at least one phase")]
    NoPhases,
    #[error("expected {expected} material values, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("ambient dimension mismatch: {0}")]
    AmbientMismatch(String),
    #[error("input and output port spaces have dimensions {input} and {output}")]
    PortDimMismatch { input: usize, output: usize },
}

/// Values `z_1..z_n` bound positionally to the phases.
pub type MaterialAssignment = [C64];

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail list produced by [`validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { name, passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<22} {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

/// Coordinates of a frame relative to the orthonormal basis of its span.
fn frame_transform(frame: &ComplexMatrix, space: &Subspace, tol: &Tolerance) -> Result<ComplexMatrix, CollectionError> {
    // frame = ortho * g with g square and nonsingular.
    let g = space.ortho().adjoint() * frame;
    inverse(&g, tol).map_err(|_| CollectionError::FrameRankDeficient {
        rows: frame.rows(),
        cols: frame.cols(),
    })
}

fn check_frame(frame: &ComplexMatrix, tol: &Tolerance) -> Result<Subspace, CollectionError> {
    let s = Subspace::span(frame, tol);
    if s.dim() != frame.cols() {
        return Err(CollectionError::FrameRankDeficient {
            rows: frame.rows(),
            cols: frame.cols(),
        });
    }
    Ok(s)
}

fn check_ambient(h: usize, spaces: &[&Subspace]) -> Result<(), CollectionError> {
    match spaces.iter().find(|s| s.ambient_dim() != h) {
        Some(s) => Err(CollectionError::AmbientMismatch(format!(
            "space in C^{} inside a collection on C^{h}",
            s.ambient_dim()
        ))),
        None => Ok(()),
    }
}

fn l_from(lambdas: &[ComplexMatrix], h: usize, z: &MaterialAssignment) -> Result<ComplexMatrix, CollectionError> {
    if z.len() != lambdas.len() {
        return Err(CollectionError::ArityMismatch {
            expected: lambdas.len(),
            got: z.len(),
        });
    }
    let mut l = ComplexMatrix::zeros(h, h);
    for (zi, lam) in z.iter().zip(lambdas) {
        l += &lam.scale(*zi);
    }
    Ok(l)
}

/// A Z(n) collection `H = U ⊕ E ⊕ J = P_1 ⊕ … ⊕ P_n`.
#[derive(Clone, Debug)]
pub struct ZCollection {
    u: Subspace,
    u_frame: ComplexMatrix,
    e: Subspace,
    j: Subspace,
    phases: Vec<Subspace>,
    tol: Tolerance,
    gamma: [ComplexMatrix; 3],
    lambda: Vec<ComplexMatrix>,
    u_coords: ComplexMatrix,
}

impl ZCollection {
    /// Builds a collection whose `U` is spanned by the columns of `u_frame`;
    /// matrices of the associated function are expressed in that frame.
    pub fn new(
        u_frame: ComplexMatrix,
        e: Subspace,
        j: Subspace,
        phases: Vec<Subspace>,
        tol: &Tolerance,
    ) -> Result<Self, CollectionError> {
        if phases.is_empty() {
            return Err(CollectionError::NoPhases);
        }
        let h = u_frame.rows();
        let u = check_frame(&u_frame, tol)?;
        let mut all = vec![&e, &j];
        all.extend(phases.iter());
        check_ambient(h, &all)?;
        let uej = DirectSum::new(vec![u.clone(), e.clone(), j.clone()], tol)?;
        let ps = DirectSum::new(phases.clone(), tol)?;
        let g = frame_transform(&u_frame, &u, tol)?;
        let u_coords = &g * &uej.coordinates(0);
        let gamma = [uej.projector(0), uej.projector(1), uej.projector(2)];
        let lambda = ps.projectors();
        Ok(Self {
            u,
            u_frame,
            e,
            j,
            phases,
            tol: *tol,
            gamma,
            lambda,
            u_coords,
        })
    }

    /// Same collection with a different frame for `U`.
    pub fn with_u_frame(&self, frame: ComplexMatrix) -> Result<Self, CollectionError> {
        Self::new(frame, self.e.clone(), self.j.clone(), self.phases.clone(), &self.tol)
    }

    pub fn h(&self) -> usize {
        self.u_frame.rows()
    }

    /// Dimension of `U`.
    pub fn m(&self) -> usize {
        self.u_frame.cols()
    }

    /// Number of phases.
    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn u(&self) -> &Subspace {
        &self.u
    }

    pub fn u_frame(&self) -> &ComplexMatrix {
        &self.u_frame
    }

    pub fn e(&self) -> &Subspace {
        &self.e
    }

    pub fn j(&self) -> &Subspace {
        &self.j
    }

    pub fn phases(&self) -> &[Subspace] {
        &self.phases
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    /// Projector onto `U` along `E ⊕ J`.
    pub fn gamma0(&self) -> &ComplexMatrix {
        &self.gamma[0]
    }

    /// Projector onto `E` along `U ⊕ J`.
    pub fn gamma1(&self) -> &ComplexMatrix {
        &self.gamma[1]
    }

    /// Projector onto `J` along `U ⊕ E`.
    pub fn gamma2(&self) -> &ComplexMatrix {
        &self.gamma[2]
    }

    /// Projector onto phase `i` (0-based) along the other phases.
    pub fn lambda(&self, i: usize) -> &ComplexMatrix {
        &self.lambda[i]
    }

    pub fn lambdas(&self) -> &[ComplexMatrix] {
        &self.lambda
    }

    /// Maps a vector of `H` to the frame coordinates of its `U` component.
    pub fn u_coords(&self) -> &ComplexMatrix {
        &self.u_coords
    }

    /// `L = Σ z_i Λ_i`.
    pub fn l_operator(&self, z: &MaterialAssignment) -> Result<ComplexMatrix, CollectionError> {
        l_from(&self.lambda, self.h(), z)
    }

    /// Phase dimensions `p_1..p_n`.
    pub fn phase_dims(&self) -> Vec<usize> {
        self.phases.iter().map(Subspace::dim).collect()
    }

    pub fn validate(&self, tol: &Tolerance) -> ValidationReport {
        let mut r = ValidationReport::default();
        r.push("u_nonzero", self.m() > 0, format!("dim U = {}", self.m()));
        direct_sum_check(&mut r, "u_e_j_direct_sum", vec![self.u.clone(), self.e.clone(), self.j.clone()], tol);
        direct_sum_check(&mut r, "phases_direct_sum", self.phases.clone(), tol);
        r
    }
}

/// A Y(n) collection `K = E ⊕ J = V ⊕ P_1 ⊕ … ⊕ P_n`.
#[derive(Clone, Debug)]
pub struct YCollection {
    v: Subspace,
    v_frame: ComplexMatrix,
    e: Subspace,
    j: Subspace,
    phases: Vec<Subspace>,
    tol: Tolerance,
    gamma: [ComplexMatrix; 2],
    pi1: ComplexMatrix,
    lambda: Vec<ComplexMatrix>,
    v_coords: ComplexMatrix,
}

impl YCollection {
    /// Builds a collection whose `V` is spanned by the columns of `v_frame`.
    pub fn new(
        v_frame: ComplexMatrix,
        e: Subspace,
        j: Subspace,
        phases: Vec<Subspace>,
        tol: &Tolerance,
    ) -> Result<Self, CollectionError> {
        let k = v_frame.rows();
        let v = check_frame(&v_frame, tol)?;
        let mut all = vec![&e, &j];
        all.extend(phases.iter());
        check_ambient(k, &all)?;
        let ej = DirectSum::new(vec![e.clone(), j.clone()], tol)?;
        let mut vp_parts = vec![v.clone()];
        vp_parts.extend(phases.iter().cloned());
        let vp = DirectSum::new(vp_parts, tol)?;
        let g = frame_transform(&v_frame, &v, tol)?;
        let v_coords = &g * &vp.coordinates(0);
        let gamma = [ej.projector(0), ej.projector(1)];
        let pi1 = vp.projector(0);
        let lambda = (0..phases.len()).map(|i| vp.projector(i + 1)).collect();
        Ok(Self {
            v,
            v_frame,
            e,
            j,
            phases,
            tol: *tol,
            gamma,
            pi1,
            lambda,
            v_coords,
        })
    }

    pub fn with_v_frame(&self, frame: ComplexMatrix) -> Result<Self, CollectionError> {
        Self::new(frame, self.e.clone(), self.j.clone(), self.phases.clone(), &self.tol)
    }

    pub fn k(&self) -> usize {
        self.v_frame.rows()
    }

    /// Dimension of `V`.
    pub fn m(&self) -> usize {
        self.v_frame.cols()
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn v(&self) -> &Subspace {
        &self.v
    }

    pub fn v_frame(&self) -> &ComplexMatrix {
        &self.v_frame
    }

    pub fn e(&self) -> &Subspace {
        &self.e
    }

    pub fn j(&self) -> &Subspace {
        &self.j
    }

    pub fn phases(&self) -> &[Subspace] {
        &self.phases
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    /// Projector onto `E` along `J`.
    pub fn gamma1(&self) -> &ComplexMatrix {
        &self.gamma[0]
    }

    /// Projector onto `J` along `E`.
    pub fn gamma2(&self) -> &ComplexMatrix {
        &self.gamma[1]
    }

    /// Projector onto `V` along `H = P_1 ⊕ … ⊕ P_n`.
    pub fn pi1(&self) -> &ComplexMatrix {
        &self.pi1
    }

    /// Projector onto `H` along `V`.
    pub fn pi2(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.k()) - &self.pi1
    }

    pub fn lambda(&self, i: usize) -> &ComplexMatrix {
        &self.lambda[i]
    }

    pub fn lambdas(&self) -> &[ComplexMatrix] {
        &self.lambda
    }

    /// Maps a vector of `K` to the frame coordinates of its `V` component.
    pub fn v_coords(&self) -> &ComplexMatrix {
        &self.v_coords
    }

    pub fn l_operator(&self, z: &MaterialAssignment) -> Result<ComplexMatrix, CollectionError> {
        l_from(&self.lambda, self.k(), z)
    }

    pub fn phase_dims(&self) -> Vec<usize> {
        self.phases.iter().map(Subspace::dim).collect()
    }

    /// `H = P_1 ⊕ … ⊕ P_n`.
    pub fn h_space(&self) -> Subspace {
        let parts: Vec<&Subspace> = self.phases.iter().collect();
        Subspace::sum_all(self.k(), &parts, &self.tol)
    }

    pub fn validate(&self, tol: &Tolerance) -> ValidationReport {
        let mut r = ValidationReport::default();
        direct_sum_check(&mut r, "e_j_direct_sum", vec![self.e.clone(), self.j.clone()], tol);
        let mut parts = vec![self.v.clone()];
        parts.extend(self.phases.iter().cloned());
        direct_sum_check(&mut r, "v_phases_direct_sum", parts, tol);
        let vj = intersect(&self.v, &self.j, tol).dim();
        r.push("v_cap_j_zero", vj == 0, format!("dim(V ∩ J) = {vj}"));
        let ve = intersect(&self.v, &self.e, tol).dim();
        r.push("v_cap_e_zero", ve == 0, format!("dim(V ∩ E) = {ve}"));
        r
    }
}

fn direct_sum_check(r: &mut ValidationReport, name: &'static str, parts: Vec<Subspace>, tol: &Tolerance) {
    let dims: Vec<usize> = parts.iter().map(Subspace::dim).collect();
    match DirectSum::new(parts, tol) {
        Ok(_) => r.push(name, true, format!("dims {dims:?}")),
        Err(e) => r.push(name, false, e.to_string()),
    }
}

/// A Y collection whose `V` splits into equal input and output port spaces.
///
/// The frame of the base collection is `[v_in frame | v_out frame]`.
#[derive(Clone, Debug)]
pub struct Superfunction {
    base: YCollection,
    half: usize,
}

impl Superfunction {
    pub fn new(
        v_in_frame: ComplexMatrix,
        v_out_frame: ComplexMatrix,
        e: Subspace,
        j: Subspace,
        phases: Vec<Subspace>,
        tol: &Tolerance,
    ) -> Result<Self, CollectionError> {
        if v_in_frame.cols() != v_out_frame.cols() {
            return Err(CollectionError::PortDimMismatch {
                input: v_in_frame.cols(),
                output: v_out_frame.cols(),
            });
        }
        let k = v_in_frame.rows();
        if v_out_frame.rows() != k {
            return Err(CollectionError::AmbientMismatch("port frames".into()));
        }
        let half = v_in_frame.cols();
        let frame = ComplexMatrix::hstack(k, &[&v_in_frame, &v_out_frame]);
        let base = YCollection::new(frame, e, j, phases, tol)?;
        Ok(Self { base, half })
    }

    /// Reinterprets a Y collection whose frame lists the input ports first.
    pub fn from_base(base: YCollection) -> Result<Self, CollectionError> {
        let m = base.m();
        if m % 2 != 0 {
            return Err(CollectionError::PortDimMismatch {
                input: m / 2,
                output: m - m / 2,
            });
        }
        Ok(Self { base, half: m / 2 })
    }

    pub fn base(&self) -> &YCollection {
        &self.base
    }

    /// Dimension of each port space.
    pub fn half(&self) -> usize {
        self.half
    }

    pub fn v_in_frame(&self) -> ComplexMatrix {
        self.base.v_frame().column_range(0, self.half)
    }

    pub fn v_out_frame(&self) -> ComplexMatrix {
        self.base.v_frame().column_range(self.half, self.half)
    }

    pub fn v_in(&self) -> Subspace {
        Subspace::span(&self.v_in_frame(), self.base.tol())
    }

    pub fn v_out(&self) -> Subspace {
        Subspace::span(&self.v_out_frame(), self.base.tol())
    }

    /// Frame coordinates of the `V^I` component (`half x k`).
    pub fn in_coords(&self) -> ComplexMatrix {
        self.base.v_coords().row_range(0, self.half)
    }

    /// Frame coordinates of the `V^O` component (`half x k`).
    pub fn out_coords(&self) -> ComplexMatrix {
        self.base.v_coords().row_range(self.half, self.half)
    }

    /// Whether `(Π^I, Π^O)` maps `space` onto `V^I ⊕ V^O`.
    fn ports_reachable(&self, space: &Subspace, tol: &Tolerance) -> (usize, usize) {
        let map = self.base.v_coords() * space.ortho();
        (rank(&map, tol), 2 * self.half)
    }

    pub fn validate(&self, tol: &Tolerance) -> ValidationReport {
        let mut r = self.base.validate(tol);
        r.push(
            "equal_port_dims",
            self.base.m() == 2 * self.half,
            format!("dim V^I = dim V^O = {}", self.half),
        );
        let (re, need) = self.ports_reachable(self.base.e(), tol);
        r.push("port_condition_e", re == need, format!("rank {re} of {need}"));
        let (rj, need) = self.ports_reachable(self.base.j(), tol);
        r.push("port_condition_j", rj == need, format!("rank {rj} of {need}"));
        r
    }
}

/// Coordinates of a `Y` ambient relative to `V ⊕ P_1 ⊕ … ⊕ P_n`.
#[derive(Clone, Debug)]
pub struct SplitCoordinates {
    /// Frame coordinates of the `V` component (`m x k`).
    pub v: ComplexMatrix,
    /// Coordinates of the `H` component in the stacked orthonormal phase bases.
    pub h: ComplexMatrix,
    /// Stacked orthonormal phase bases (`k x (k − m)`).
    pub h_basis: ComplexMatrix,
    pub phase_dims: Vec<usize>,
}

impl SplitCoordinates {
    /// Diagonal of `L(z)` in the `h` coordinates.
    pub fn h_weights(&self, z: &MaterialAssignment) -> Vec<C64> {
        self.phase_dims
            .iter()
            .zip(z)
            .flat_map(|(&d, &zi)| std::iter::repeat_n(zi, d))
            .collect()
    }
}

pub fn split_coordinates(c: &YCollection) -> SplitCoordinates {
    let k = c.k();
    let orthos: Vec<&ComplexMatrix> = c.phases().iter().map(|p| p.ortho()).collect();
    let h_basis = ComplexMatrix::hstack(k, &orthos);
    let full = ComplexMatrix::hstack(k, &[c.v_frame(), &h_basis]);
    let inv = inverse(&full, c.tol()).expect("V and the phases form a direct sum");
    let m = c.m();
    SplitCoordinates {
        v: inv.row_range(0, m),
        h: inv.row_range(m, k - m),
        h_basis,
        phase_dims: c.phase_dims(),
    }
}

/// Any of the three collection kinds.
#[derive(Clone, Debug)]
pub enum AnyCollection {
    Z(ZCollection),
    Y(YCollection),
    Super(Superfunction),
}

impl AnyCollection {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyCollection::Z(_) => "Z",
            AnyCollection::Y(_) => "Y",
            AnyCollection::Super(_) => "super",
        }
    }
}

/// Checks the structural conditions of a collection; never fails.
pub fn validate(c: &AnyCollection, tol: &Tolerance) -> ValidationReport {
    match c {
        AnyCollection::Z(z) => z.validate(tol),
        AnyCollection::Y(y) => y.validate(tol),
        AnyCollection::Super(s) => s.validate(tol),
    }
}

/// `L(z)` for any collection kind.
pub fn l_operator(c: &AnyCollection, z: &MaterialAssignment) -> Result<ComplexMatrix, CollectionError> {
    match c {
        AnyCollection::Z(x) => x.l_operator(z),
        AnyCollection::Y(x) => x.l_operator(z),
        AnyCollection::Super(s) => s.base().l_operator(z),
    }
}
