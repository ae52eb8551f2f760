//! Pruning, normalization (Y to Z), reduction (Z to Y) and the
//! continued-fraction driver that alternates the last two.

use thiserror::Error;

use crate::collections::{split_coordinates, CollectionError, MaterialAssignment, YCollection, ZCollection};
use crate::numcore::{column_space, column_space_scaled, pseudo_inverse, rank, ComplexMatrix, Tolerance, C64};
use crate::solvers::{eval_y, eval_z, SolveError};
use crate::spaces::{image, intersect, Subspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("assumption {condition} violated: {detail}")]
    AssumptionViolated { condition: &'static str, detail: String },
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn violated(condition: &'static str, detail: String) -> ReductionError {
    ReductionError::AssumptionViolated { condition, detail }
}

/// Dimensions of a collection: ambient, `U` or `V`, `E`, `J` and the phases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectionDims {
    pub ambient: usize,
    pub m: usize,
    pub q1: usize,
    pub q2: usize,
    pub phases: Vec<usize>,
}

impl CollectionDims {
    pub fn of_z(c: &ZCollection) -> Self {
        Self {
            ambient: c.h(),
            m: c.m(),
            q1: c.e().dim(),
            q2: c.j().dim(),
            phases: c.phase_dims(),
        }
    }

    pub fn of_y(c: &YCollection) -> Self {
        Self {
            ambient: c.k(),
            m: c.m(),
            q1: c.e().dim(),
            q2: c.j().dim(),
            phases: c.phase_dims(),
        }
    }

    /// Inequalities satisfied by a pruned Z collection; returns the violated ones.
    pub fn z_violations(&self) -> Vec<String> {
        let (m, q1, q2) = (self.m, self.q1, self.q2);
        let n = self.phases.len();
        let mut out = Vec::new();
        for (i, &p) in self.phases.iter().enumerate() {
            if p > m + q1 {
                out.push(format!("p_{} = {p} > m + q1 = {}", i + 1, m + q1));
            }
            if p > m + q2 {
                out.push(format!("p_{} = {p} > m + q2 = {}", i + 1, m + q2));
            }
        }
        if q2 > (n - 1) * (m + q1) {
            out.push(format!("q2 = {q2} > (n-1)(m+q1)"));
        }
        if q1 > (n - 1) * (m + q2) {
            out.push(format!("q1 = {q1} > (n-1)(m+q2)"));
        }
        if n == 2 {
            if q1.abs_diff(q2) > m {
                out.push(format!("|q1 - q2| = {} > m = {m}", q1.abs_diff(q2)));
            }
            for (i, &p) in self.phases.iter().enumerate() {
                if p < q1.max(q2) {
                    out.push(format!("p_{} = {p} < max(q1, q2)", i + 1));
                }
            }
        }
        out
    }

    /// Inequalities satisfied by a pruned Y collection (`m` is `dim V`).
    pub fn y_violations(&self) -> Vec<String> {
        let (v, q1, q2) = (self.m, self.q1, self.q2);
        let n = self.phases.len();
        let mut out = Vec::new();
        for (i, &p) in self.phases.iter().enumerate() {
            if p > q1.min(q2) {
                out.push(format!("p_{} = {p} > min(q1, q2) = {}", i + 1, q1.min(q2)));
            }
        }
        if n >= 1 {
            if q2 > v + (n - 1) * q1 {
                out.push(format!("q2 = {q2} > v + (n-1)q1"));
            }
            if q1 > v + (n - 1) * q2 {
                out.push(format!("q1 = {q1} > v + (n-1)q2"));
            }
        }
        if n == 2 {
            if q1.abs_diff(q2) > v {
                out.push(format!("|q1 - q2| = {} > v = {v}", q1.abs_diff(q2)));
            }
            for (i, &p) in self.phases.iter().enumerate() {
                if p + v < q1.max(q2) {
                    out.push(format!("p_{} = {p} < max(q1, q2) - v", i + 1));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneReport {
    pub before: CollectionDims,
    pub after: CollectionDims,
    pub iterations: usize,
}

/// Smallest subspace containing `start` and invariant under every operator.
///
/// Only the directions found in the previous round are mapped again; their
/// images are orthogonalized against the current basis before the rank decision.
fn closure(start: &Subspace, ops: &[&ComplexMatrix], tol: &Tolerance) -> (Subspace, usize) {
    let n = start.ambient_dim();
    let scale = ops.iter().map(|op| op.frobenius_norm()).fold(0.0, f64::max);
    let mut basis = start.ortho().clone();
    let mut frontier = basis.clone();
    let mut iterations = 0;
    while frontier.cols() > 0 && basis.cols() < n {
        iterations += 1;
        let images: Vec<ComplexMatrix> = ops.iter().map(|op| *op * &frontier).collect();
        let refs: Vec<&ComplexMatrix> = images.iter().collect();
        let mut r = ComplexMatrix::hstack(n, &refs);
        for _ in 0..2 {
            let proj = &basis * &(&basis.adjoint() * &r);
            r = &r - &proj;
        }
        frontier = column_space_scaled(&r, scale, tol);
        if frontier.cols() > 0 {
            let proj = &basis * &(&basis.adjoint() * &frontier);
            frontier = column_space(&(&frontier - &proj), tol);
            basis = ComplexMatrix::hstack(n, &[&basis, &frontier]);
        }
    }
    (Subspace::span(&basis, tol), iterations)
}

/// Restriction of invariant data to the coordinates of an invariant subspace.
struct Restriction {
    basis: ComplexMatrix,
    coords: ComplexMatrix,
}

impl Restriction {
    fn new(s: &Subspace, tol: &Tolerance) -> Self {
        let basis = s.ortho().clone();
        let coords = pseudo_inverse(&basis, tol);
        Self { basis, coords }
    }

    fn image_of(&self, op: &ComplexMatrix, tol: &Tolerance) -> Subspace {
        Subspace::span_scaled(&(&self.coords * &(op * &self.basis)), op.frobenius_norm(), tol)
    }

    fn vectors(&self, v: &ComplexMatrix) -> ComplexMatrix {
        &self.coords * v
    }
}

/// Restricts a Z collection to the closure of `U` under `Γ_1` and the `Λ_i`.
pub fn prune_z(c: &ZCollection, tol: &Tolerance) -> Result<(ZCollection, PruneReport), ReductionError> {
    let mut ops = vec![c.gamma1()];
    ops.extend(c.lambdas());
    let (h, iterations) = closure(c.u(), &ops, tol);
    let r = Restriction::new(&h, tol);
    let phases = c.lambdas().iter().map(|l| r.image_of(l, tol)).collect();
    let out = ZCollection::new(
        r.vectors(c.u_frame()),
        r.image_of(c.gamma1(), tol),
        r.image_of(c.gamma2(), tol),
        phases,
        c.tol(),
    )?;
    let report = PruneReport {
        before: CollectionDims::of_z(c),
        after: CollectionDims::of_z(&out),
        iterations,
    };
    Ok((out, report))
}

/// Restricts a Y collection to the closure of `V` under `Γ_1` and the `Λ_i`.
pub fn prune_y(c: &YCollection, tol: &Tolerance) -> Result<(YCollection, PruneReport), ReductionError> {
    let mut ops = vec![c.gamma1()];
    ops.extend(c.lambdas());
    let (k, iterations) = closure(c.v(), &ops, tol);
    let r = Restriction::new(&k, tol);
    let phases = c.lambdas().iter().map(|l| r.image_of(l, tol)).collect();
    let out = YCollection::new(
        r.vectors(c.v_frame()),
        r.image_of(c.gamma1(), tol),
        r.image_of(c.gamma2(), tol),
        phases,
        c.tol(),
    )?;
    let report = PruneReport {
        before: CollectionDims::of_y(c),
        after: CollectionDims::of_y(&out),
        iterations,
    };
    Ok((out, report))
}

fn require_trivial(s: Subspace, condition: &'static str) -> Result<(), ReductionError> {
    if s.dim() == 0 {
        Ok(())
    } else {
        Err(violated(condition, format!("intersection has dimension {}", s.dim())))
    }
}

/// Writes each column of `target` as `a·x + b·y` with columns of `a`, `b`
/// spanning complementary spaces, and returns the coefficients on `a`.
fn split_along(a: &ComplexMatrix, b: &ComplexMatrix, target: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    let both = ComplexMatrix::hstack(a.rows(), &[a, b]);
    (&pseudo_inverse(&both, tol) * target).row_range(0, a.cols())
}

/// Normalization of a Y collection: a Z collection on `H = P_1 ⊕ … ⊕ P_n`
/// with `Y(z) = M Z(z) K`. The frame of `U` is chosen as the image of the
/// frame of `V` under the natural map, so `K = I`.
pub fn normalize_y(c: &YCollection) -> Result<(ZCollection, ComplexMatrix, ComplexMatrix), ReductionError> {
    let tol = c.tol();
    let m = c.m();
    let hs = c.h_space();
    let et = image(c.gamma1(), c.v(), tol);
    let jt = image(c.gamma2(), c.v(), tol);
    require_trivial(intersect(&hs, &et, tol), "H ∩ Γ1'V = 0")?;
    require_trivial(intersect(c.v(), c.j(), tol), "V ∩ J' = 0")?;
    require_trivial(intersect(&hs, &jt, tol), "H ∩ Γ2'V = 0")?;
    require_trivial(intersect(c.v(), c.e(), tol), "V ∩ E' = 0")?;

    let sc = split_coordinates(c);
    let vf = c.v_frame();
    let u_raw = &sc.h_basis * &(&sc.h * &(c.gamma1() * vf));
    // v = −e + Ẽ with e ∈ U, Ẽ ∈ Γ1'V.
    let a = split_along(&u_raw, &(c.gamma1() * vf), vf, tol);
    let u_frame = -(&u_raw * &a);
    // u = −J'_1 + J̃ with J'_1 ∈ V, J̃ ∈ Γ2'V; the map u ↦ −J'_1 in frame coordinates.
    let mm = split_along(vf, &(c.gamma2() * vf), &u_frame, tol);

    let e = intersect(c.e(), &hs, tol);
    let j = intersect(c.j(), &hs, tol);
    let to_h = |s: &Subspace| Subspace::span(&(&sc.h * s.ortho()), tol);
    let mut phases = Vec::new();
    let mut start = 0;
    for &d in &sc.phase_dims {
        phases.push(Subspace::coordinate(
            hs.dim(),
            &(start..start + d).collect::<Vec<_>>(),
        ));
        start += d;
    }
    let z = ZCollection::new(&sc.h * &u_frame, to_h(&e), to_h(&j), phases, tol)?;
    Ok((z, mm, ComplexMatrix::identity(m)))
}

/// Parameters `w_ijk` of a reduction, for `i < n − 1` (zero-based):
/// `Γ0 Λ_i u_j = Σ_k w_ijk u_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionParams {
    pub m: usize,
    pub n: usize,
    /// `w[i]` has entry `(k, j)` equal to `w_ijk`.
    pub w: Vec<ComplexMatrix>,
}

impl ReductionParams {
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.w[i][(k, j)]
    }

    pub fn v_dim(&self) -> usize {
        self.m * (self.n - 1)
    }

    /// Dense `(n−1)·m·m` tensor, index `(i, j, k)` row-major.
    pub fn to_tensor(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.v_dim() * self.m);
        for i in 0..self.n - 1 {
            for j in 0..self.m {
                for k in 0..self.m {
                    out.push(self.get(i, j, k));
                }
            }
        }
        out
    }
}

/// Reduction of a Z collection to a Y collection on `K = E ⊕ J` with
/// `V = span{(I − Γ0) Λ_i u_j}`, the frame of `V` being these vectors in
/// order `(i, j)`. Coordinates on `K` are `[E | J]` orthonormal bases.
pub fn reduce_z(c: &ZCollection) -> Result<(YCollection, ReductionParams), ReductionError> {
    let tol = c.tol();
    let (m, n) = (c.m(), c.n());
    let kspace = c.e().sum(c.j(), tol);
    for (i, l) in c.lambdas().iter().enumerate() {
        let pt = image(l, c.u(), tol);
        require_trivial(intersect(&pt, &kspace, tol), "Λ_j U ∩ K = 0")?;
        if pt.dim() != m {
            return Err(violated("Λ_j u = 0 only for u = 0", format!("Λ_{} U has dimension {}", i + 1, pt.dim())));
        }
        let others: Vec<&Subspace> = c.phases().iter().enumerate().filter(|(p, _)| *p != i).map(|(_, s)| s).collect();
        let rest = Subspace::sum_all(c.h(), &others, tol);
        require_trivial(intersect(c.u(), &rest, tol), "U ∩ (sum of other phases) = 0")?;
    }

    let uf = c.u_frame();
    let w: Vec<ComplexMatrix> = c.lambdas()[..n - 1].iter().map(|l| c.u_coords() * &(l * uf)).collect();
    let mut vf = ComplexMatrix::zeros(c.h(), m * (n - 1));
    for (i, l) in c.lambdas()[..n - 1].iter().enumerate() {
        let lu = l * uf;
        vf.set_block(0, i * m, &(&lu - &(uf * &w[i])));
    }
    if rank(&vf, tol) != m * (n - 1) {
        return Err(violated("dim V = m(n-1)", format!("rank {} of {} vectors", rank(&vf, tol), m * (n - 1))));
    }

    let (q1, q2) = (c.e().dim(), c.j().dim());
    let basis = ComplexMatrix::hstack(c.h(), &[c.e().ortho(), c.j().ortho()]);
    let coords = pseudo_inverse(&basis, tol);
    let k = q1 + q2;
    let phases = c
        .phases()
        .iter()
        .map(|p| Subspace::span(&(&coords * intersect(p, &kspace, tol).ortho()), tol))
        .collect();
    let y = YCollection::new(
        &coords * &vf,
        Subspace::coordinate(k, &(0..q1).collect::<Vec<_>>()),
        Subspace::coordinate(k, &(q1..k).collect::<Vec<_>>()),
        phases,
        tol,
    )?;
    Ok((y, ReductionParams { m, n, w }))
}

/// `Z = Γ0LΓ0 − Γ0LΠ1 (Y + Π1LΠ1)⁻¹ Π1LΓ0` written in the bases `u_j`, `v_ij`,
/// with every operator except `Y` expressed through the `w_ijk`.
pub fn recursion_z(p: &ReductionParams, y: &ComplexMatrix, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    let (m, n) = (p.m, p.n);
    if z.len() != n {
        return Err(CollectionError::ArityMismatch {
            expected: n,
            got: z.len(),
        }
        .into());
    }
    let zn = z[n - 1];
    let d: Vec<C64> = z[..n - 1].iter().map(|zi| zi - zn).collect();
    let mut s = ComplexMatrix::zeros(m, m);
    for (wi, di) in p.w.iter().zip(&d) {
        s = &s + &wi.scale(*di);
    }
    let g0lg0 = &ComplexMatrix::identity(m).scale(zn) + &s;
    let nv = p.v_dim();
    if nv == 0 {
        return Ok(g0lg0);
    }
    let mut g0lp1 = ComplexMatrix::zeros(m, nv);
    let mut p1lg0 = ComplexMatrix::zeros(nv, m);
    let mut p1lp1 = ComplexMatrix::identity(nv).scale(zn);
    for i in 0..n - 1 {
        g0lp1.set_block(0, i * m, &(&p.w[i].scale(d[i]) - &(&s * &p.w[i])));
        p1lg0.set_block(i * m, 0, &ComplexMatrix::identity(m).scale(d[i]));
        for (q, dq) in d.iter().enumerate() {
            let mut block = -&p.w[i];
            if q == i {
                block = &block + &ComplexMatrix::identity(m);
            }
            let cur = p1lp1.submatrix(q * m, i * m, m, m);
            p1lp1.set_block(q * m, i * m, &(&cur + &block.scale(*dq)));
        }
    }
    let inner = y + &p1lp1;
    let tol = Tolerance::default();
    let x = crate::numcore::solve_linear(&inner, &p1lg0, &tol).map_err(|_| SolveError::SingularCoupling)?;
    Ok(&g0lg0 - &(&g0lp1 * &x))
}

/// Central-difference estimate of the `w_ijk` from values of `Z` near `(1, …, 1)`.
pub fn w_from_differences(
    zfun: impl Fn(&[C64]) -> Result<ComplexMatrix, SolveError>,
    n: usize,
    step: f64,
) -> Result<Vec<ComplexMatrix>, SolveError> {
    let one = vec![C64::new(1.0, 0.0); n];
    (0..n - 1)
        .map(|i| {
            let mut plus = one.clone();
            let mut minus = one.clone();
            plus[i] += step;
            minus[i] -= step;
            let diff = &zfun(&plus)? - &zfun(&minus)?;
            Ok(diff.scale(C64::new(0.5 / step, 0.0)))
        })
        .collect()
}

/// Dimensions at one level of a continued fraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelDims {
    pub z: CollectionDims,
    pub v: usize,
}

/// One reduction followed by one normalization.
#[derive(Clone, Debug)]
pub struct CFLevel {
    pub index: usize,
    pub w: ReductionParams,
    pub m: ComplexMatrix,
    pub k: ComplexMatrix,
    pub dims: LevelDims,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CFStop {
    /// The remaining space has no `E ⊕ J` part or the reduced `V` is zero.
    Exhausted,
    MaxDepth,
    AssumptionViolated { level: usize, stage: &'static str, detail: String },
}

/// What is left after the last complete level; solved directly on evaluation.
#[derive(Clone, Debug)]
pub enum CFTail {
    Z(ZCollection),
    Y { w: ReductionParams, y: YCollection },
}

#[derive(Clone, Debug)]
pub struct ContinuedFraction {
    pub levels: Vec<CFLevel>,
    pub tail: CFTail,
    pub stop: CFStop,
}

impl ContinuedFraction {
    /// Solves the tail and substitutes back up through every level.
    pub fn evaluate(&self, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
        let mut value = match &self.tail {
            CFTail::Z(c) => eval_z(c, z)?,
            CFTail::Y { w, y } => {
                let yv = if y.m() == 0 {
                    ComplexMatrix::zeros(0, 0)
                } else {
                    eval_y(y, z)?
                };
                recursion_z(w, &yv, z)?
            }
        };
        for level in self.levels.iter().rev() {
            let y = &level.m * &(&value * &level.k);
            value = recursion_z(&level.w, &y, z)?;
        }
        Ok(value)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

fn stop_from(err: ReductionError, level: usize, stage: &'static str) -> CFStop {
    let detail = match err {
        ReductionError::AssumptionViolated { condition, detail } => format!("{condition}: {detail}"),
        other => other.to_string(),
    };
    CFStop::AssumptionViolated { level, stage, detail }
}

/// Continued-fraction expansion by alternating reduction and normalization.
pub fn continued_fraction(c: &ZCollection, max_depth: usize) -> ContinuedFraction {
    continued_fraction_with(c, max_depth, |_, y| y)
}

/// As [`continued_fraction`], with `hook` applied to each reduced Y collection
/// before it is normalized (for example a reference transformation).
/// Evaluation uses the collections returned by the hook.
pub fn continued_fraction_with(
    c: &ZCollection,
    max_depth: usize,
    mut hook: impl FnMut(usize, YCollection) -> YCollection,
) -> ContinuedFraction {
    let mut levels = Vec::new();
    let mut cur = c.clone();
    let (tail, stop) = loop {
        let index = levels.len();
        if cur.e().dim() + cur.j().dim() == 0 {
            break (CFTail::Z(cur), CFStop::Exhausted);
        }
        if index == max_depth {
            break (CFTail::Z(cur), CFStop::MaxDepth);
        }
        let (y, w) = match reduce_z(&cur) {
            Ok(r) => r,
            Err(e) => break (CFTail::Z(cur), stop_from(e, index, "reduction")),
        };
        if y.m() == 0 {
            break (CFTail::Y { w, y }, CFStop::Exhausted);
        }
        let y = hook(index, y);
        match normalize_y(&y) {
            Ok((next, mm, kk)) => {
                levels.push(CFLevel {
                    index,
                    dims: LevelDims {
                        z: CollectionDims::of_z(&cur),
                        v: y.m(),
                    },
                    w,
                    m: mm,
                    k: kk,
                });
                cur = next;
            }
            Err(e) => break (CFTail::Z(cur), stop_from(e, index, "normalization")),
        }
    };
    ContinuedFraction { levels, tail, stop }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::extension;
    use crate::numcore::{c64, re};
    use crate::random;
    use crate::solvers::annulus_point;
    use rand::Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64) -> bool {
        a.max_abs_diff(b) < eps * (1.0 + a.max_abs().max(b.max_abs()))
    }

    /// Appends a block `D = E_pad ⊕ J_pad = P_1,pad ⊕ …` invariant under every projection.
    fn pad_z<R: Rng>(g: &mut R, c: &ZCollection, e_pad: usize, phase_pad: &[usize]) -> ZCollection {
        let t = tol();
        let h = c.h();
        let d: usize = phase_pad.iter().sum();
        let total = h + d;
        let lift = |x: &ComplexMatrix, top: bool| {
            let mut out = ComplexMatrix::zeros(total, x.cols());
            out.set_block(if top { 0 } else { h }, 0, x);
            out
        };
        let ej = random::generic_split(g, d, &[e_pad, d - e_pad], &t);
        let ps = random::generic_split(g, d, phase_pad, &t);
        let join = |a: &Subspace, b: &ComplexMatrix| {
            Subspace::span(&ComplexMatrix::hstack(total, &[&lift(a.ortho(), true), &lift(b, false)]), &t)
        };
        ZCollection::new(
            lift(c.u_frame(), true),
            join(c.e(), &ej[0]),
            join(c.j(), &ej[1]),
            c.phases().iter().zip(&ps).map(|(p, q)| join(p, q)).collect(),
            &t,
        )
        .unwrap()
    }

    #[test]
    fn pruning_removes_disconnected_blocks() {
        let t = tol();
        let mut g = random::rng(41);
        let c = random::z_collection(&mut g, 1, 2, &[3, 2]);
        let padded = pad_z(&mut g, &c, 2, &[2, 2]);
        let (pruned, report) = prune_z(&padded, &t).unwrap();
        assert_eq!(report.before.ambient, 9);
        assert_eq!(report.after, CollectionDims::of_z(&c));
        assert!(report.after.z_violations().is_empty());
        for _ in 0..20 {
            let z = annulus_point(&mut g, 2);
            assert!(close(&eval_z(&pruned, &z).unwrap(), &eval_z(&padded, &z).unwrap(), 1e-8));
        }
        let (again, report) = prune_z(&pruned, &t).unwrap();
        assert_eq!(report.before, report.after);
        assert_eq!(again.h(), pruned.h());
    }

    #[test]
    fn pruned_z_dimension_inequalities() {
        let t = tol();
        let mut g = random::rng(42);
        for (m, e, dims) in [(1, 1, vec![2, 2]), (1, 3, vec![4, 1]), (2, 2, vec![3, 3]), (1, 2, vec![2, 2, 2])] {
            let c = random::z_collection(&mut g, m, e, &dims);
            let (p, report) = prune_z(&c, &t).unwrap();
            assert!(report.after.z_violations().is_empty(), "{:?}", report.after.z_violations());
            for _ in 0..5 {
                let z = annulus_point(&mut g, dims.len());
                assert!(close(&eval_z(&p, &z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-8));
            }
        }
        // U inside P_1: only P_1's share survives.
        let square = crate::atoms::z2_collection([re(-1.0), re(1.0), re(1.0)], [re(1.0); 3], &t).unwrap();
        let (_, report) = prune_z(&square, &t).unwrap();
        assert!(report.after.z_violations().is_empty());
    }

    #[test]
    fn pruning_y_collections() {
        let t = tol();
        let mut g = random::rng(43);
        for (m, e, dims) in [(1, 2, vec![2, 1]), (2, 3, vec![2, 2]), (1, 2, vec![1, 1, 1])] {
            let c = random::y_collection(&mut g, m, e, &dims);
            let (p, report) = prune_y(&c, &t).unwrap();
            assert!(report.after.y_violations().is_empty(), "{:?}", report.after.y_violations());
            for _ in 0..5 {
                let z = annulus_point(&mut g, dims.len());
                assert!(close(&eval_y(&p, &z).unwrap(), &eval_y(&c, &z).unwrap(), 1e-8));
            }
            let (_, again) = prune_y(&p, &t).unwrap();
            assert_eq!(again.before, again.after);
        }
        // Linear Y(z1) on C^1 ⊕ C^1 padded by an extra invariant 2-dim block.
        let lin = crate::atoms::one_dim_y(&[re(0.5)], &[re(2.0)], &t).unwrap();
        let k = lin.k();
        let total = k + 2;
        let lift = |x: &ComplexMatrix, off: usize| {
            let mut out = ComplexMatrix::zeros(total, x.cols());
            out.set_block(off, 0, x);
            out
        };
        let pe = lift(&ComplexMatrix::from_real_rows(&[&[1.0], &[1.0]]), k);
        let pj = lift(&ComplexMatrix::from_real_rows(&[&[1.0], &[-1.0]]), k);
        let both = |s: &Subspace, x: &ComplexMatrix| {
            Subspace::span(&ComplexMatrix::hstack(total, &[&lift(s.ortho(), 0), x]), &t)
        };
        let padded = YCollection::new(
            lift(lin.v_frame(), 0),
            both(lin.e(), &pe),
            both(lin.j(), &pj),
            vec![both(&lin.phases()[0], &lift(&ComplexMatrix::identity(2), k))],
            &t,
        )
        .unwrap();
        let (p, report) = prune_y(&padded, &t).unwrap();
        assert_eq!(report.after.ambient, k);
        let z = [c64(0.3, 0.9)];
        assert!(close(&eval_y(&p, &z).unwrap(), &eval_y(&lin, &z).unwrap(), 1e-10));
    }

    #[test]
    fn normalization_law() {
        let mut g = random::rng(44);
        for (m, e, dims) in [(1, 2, vec![2, 1]), (2, 3, vec![2, 2]), (1, 2, vec![1, 1, 1])] {
            let c = random::y_collection(&mut g, m, e, &dims);
            let (z, mm, kk) = normalize_y(&c).unwrap();
            assert_eq!(z.m(), m);
            assert!(close(&kk, &ComplexMatrix::identity(m), 1e-14));
            let ones = vec![re(1.0); dims.len()];
            assert!(close(&eval_y(&c, &ones).unwrap(), &(&mm * &kk), 1e-9));
            for _ in 0..20 {
                let w = annulus_point(&mut g, dims.len());
                let expect = &mm * &(&eval_z(&z, &w).unwrap() * &kk);
                assert!(close(&eval_y(&c, &w).unwrap(), &expect, 1e-8));
            }
        }
    }

    #[test]
    fn normalization_undoes_extension() {
        let t = tol();
        let mut g = random::rng(45);
        let c = random::z_collection(&mut g, 2, 2, &[3, 3]);
        let tm = random::matrix(&mut g, 2, 2);
        let y = extension(&c, &tm).unwrap();
        let (z, mm, kk) = normalize_y(&y).unwrap();
        assert_eq!(z.h(), c.h());
        for _ in 0..20 {
            let w = annulus_point(&mut g, 2);
            let back = &mm * &(&eval_z(&z, &w).unwrap() * &kk);
            assert!(close(&back, &eval_z(&c, &w).unwrap(), 1e-8));
        }
        let bad = YCollection::new(
            y.j().ortho().column_range(0, 2),
            y.e().clone(),
            y.j().clone(),
            y.phases().to_vec(),
            &t,
        );
        if let Ok(bad) = bad {
            assert!(matches!(
                normalize_y(&bad),
                Err(ReductionError::AssumptionViolated { condition: "V ∩ J' = 0", .. })
            ));
        }
    }

    #[test]
    fn normalization_rejects_v_inside_j() {
        let t = tol();
        // K = C^3, V = span(e1), J' ∋ e1, phases span(e2), span(e3).
        let e = |i: usize| ComplexMatrix::identity(3).column_range(i, 1);
        let c = YCollection::new(
            e(0),
            Subspace::span(&ComplexMatrix::from_real_rows(&[&[0.0], &[1.0], &[1.0]]), &t),
            Subspace::span(&ComplexMatrix::hstack(3, &[&e(0), &e(1)]), &t),
            vec![Subspace::span(&e(1), &t), Subspace::span(&e(2), &t)],
            &t,
        )
        .unwrap();
        assert!(matches!(normalize_y(&c), Err(ReductionError::AssumptionViolated { .. })));
    }

    #[test]
    fn reduction_of_one_phase() {
        let mut g = random::rng(46);
        let c = random::z_collection(&mut g, 2, 2, &[6]);
        let (y, w) = reduce_z(&c).unwrap();
        assert_eq!(y.m(), 0);
        assert_eq!(w.v_dim(), 0);
        let z = [c64(0.7, 0.4)];
        let r = recursion_z(&w, &ComplexMatrix::zeros(0, 0), &z).unwrap();
        assert!(close(&r, &ComplexMatrix::identity(2).scale(z[0]), 1e-14));
        assert!(close(&eval_z(&c, &z).unwrap(), &r, 1e-10));
    }

    #[test]
    fn reduction_recursion_matches_solver() {
        let mut g = random::rng(47);
        for (m, e, dims) in [(1, 2, vec![3, 2]), (2, 2, vec![4, 3]), (1, 2, vec![2, 2, 2]), (2, 4, vec![4, 3, 3])] {
            let n = dims.len();
            let c = random::z_collection(&mut g, m, e, &dims);
            let (y, w) = reduce_z(&c).unwrap();
            assert_eq!(y.m(), m * (n - 1));
            for _ in 0..20 {
                let z = annulus_point(&mut g, n);
                let r = recursion_z(&w, &eval_y(&y, &z).unwrap(), &z).unwrap();
                assert!(close(&r, &eval_z(&c, &z).unwrap(), 1e-8));
            }
            let fd = w_from_differences(|z| eval_z(&c, z), n, 1e-5).unwrap();
            for (a, b) in fd.iter().zip(&w.w) {
                assert!(a.max_abs_diff(b) < 1e-6);
            }
        }
    }

    #[test]
    fn continued_fraction_reconstructs() {
        let mut g = random::rng(48);
        for (m, e, dims) in [(1, 2, vec![3, 2]), (1, 3, vec![4, 3]), (2, 2, vec![3, 3]), (2, 4, vec![5, 5])] {
            let c = random::z_collection(&mut g, m, e, &dims);
            let cf = continued_fraction(&c, 10);
            assert_eq!(cf.stop, CFStop::Exhausted, "{:?}", cf.stop);
            assert!(cf.depth() >= 1);
            for level in &cf.levels {
                assert!(crate::numcore::is_nonsingular(&level.m, &tol()));
            }
            for _ in 0..20 {
                let z = annulus_point(&mut g, dims.len());
                assert!(close(&cf.evaluate(&z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-7));
            }
            let short = continued_fraction(&c, 0);
            assert_eq!(short.stop, CFStop::MaxDepth);
            let z = annulus_point(&mut g, dims.len());
            assert!(close(&short.evaluate(&z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-9));
        }
        let one = random::z_collection(&mut g, 1, 2, &[5]);
        let cf = continued_fraction(&one, 5);
        assert_eq!(cf.depth(), 0);
        assert_eq!(cf.stop, CFStop::Exhausted);
    }

    #[test]
    fn continued_fraction_stops_on_violation() {
        let t = tol();
        let mut g = random::rng(49);
        let ps = random::generic_split(&mut g, 5, &[3, 2], &t);
        let phases: Vec<Subspace> = ps.iter().map(|p| Subspace::span(p, &t)).collect();
        let u = random::matrix(&mut g, 5, 1);
        let d = crate::spaces::DirectSum::new(phases.clone(), &t).unwrap();
        let p1 = &d.projector(0) * &u;
        // (I − Γ0) Λ_1 u = p1 − u/2 lies in J, so V ⊂ J'.
        let v = &p1 - &u.scale(re(0.5));
        let j = Subspace::span(&ComplexMatrix::hstack(5, &[&v, &random::matrix(&mut g, 5, 1)]), &t);
        let e = Subspace::span(&random::matrix(&mut g, 5, 2), &t);
        let c = ZCollection::new(u, e, j, phases, &t).unwrap();
        let cf = continued_fraction(&c, 5);
        match &cf.stop {
            CFStop::AssumptionViolated { level, stage, .. } => {
                assert_eq!(*level, 0);
                assert_eq!(*stage, "normalization");
            }
            other => panic!("unexpected stop {other:?}"),
        }
        let z = [c64(0.4, 0.6), c64(1.2, -0.3)];
        assert!(close(&cf.evaluate(&z).unwrap(), &eval_z(&c, &z).unwrap(), 1e-8));
    }
}
