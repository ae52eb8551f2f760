//! Associated functions `Z(z)`, `Y(z)` and `F(z)` from the closed-form
//! operator formulas, and the resolvent series for `Z`.
//!
//! Two formulas are available for each kind:
//!
//! * direct: `Z = Γ0[(Γ0+Γ2) L⁻¹ (Γ0+Γ2)]⁻¹Γ0` with the outer inverse on
//!   `U ⊕ J`, and `Y = Π1Γ2(Γ2 L⁻¹ Π2 Γ2)⁻¹Γ2Π1` with the outer inverse on `J`;
//! * shifted, for a constant `z0 ≠ 0`: `Z = z0 Γ0 L [z0 I + Γ1(L − z0 I)]⁻¹ Γ0`
//!   and `Y = −z0 Π1 + z0 Π1 [Γ1 + z0 (L − z0 I)⁻¹ Π2]⁻¹ Π1`.
//!
//! `Y` follows the sign convention `J_1 = −Y E_1`.

use thiserror::Error;

use crate::collections::{CollectionError, MaterialAssignment, Superfunction, YCollection, ZCollection};
use crate::numcore::{c64, inverse, is_nonsingular, re, restricted_inverse, solve_linear, ComplexMatrix, Tolerance, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("L is singular: some z_i vanishes")]
    SingularL,
    #[error("the compressed operator on J is singular")]
    SingularOnJ,
    #[error("the shifted resolvent is singular for z0 = {0}")]
    SingularResolvent(C64),
    #[error("Y^IO is singular")]
    SingularCoupling,
    #[error("F^EJ is singular")]
    SingularFEJ,
    #[error("series terms stopped decreasing at order {0}")]
    Divergent(usize),
    #[error(transparent)]
    Collection(#[from] CollectionError),
}

/// Which closed-form formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Direct,
    Shifted(C64),
}

impl Default for Method {
    fn default() -> Self {
        Method::Shifted(re(1.0))
    }
}

/// Shift values tried in order by the default evaluators.
pub const SHIFT_LADDER: [C64; 4] = [
    C64 { re: 1.0, im: 0.0 },
    C64 { re: 1.0, im: 0.3 },
    C64 { re: 1.0, im: -0.3 },
    C64 { re: 2.0, im: 0.0 },
];

/// An evaluated associated function.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedEval {
    pub value: ComplexMatrix,
    pub z: Vec<C64>,
    pub method: Method,
}

fn check_arity(n: usize, z: &MaterialAssignment) -> Result<(), SolveError> {
    if z.len() != n {
        return Err(CollectionError::ArityMismatch {
            expected: n,
            got: z.len(),
        }
        .into());
    }
    Ok(())
}

fn weighted_lambdas(lambdas: &[ComplexMatrix], dim: usize, w: impl Fn(usize) -> C64) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (i, lam) in lambdas.iter().enumerate() {
        out += &lam.scale(w(i));
    }
    out
}

fn check_nonzero(z: &MaterialAssignment) -> Result<(), SolveError> {
    if z.iter().any(|x| x.norm() == 0.0 || !x.re.is_finite() || !x.im.is_finite()) {
        return Err(SolveError::SingularL);
    }
    Ok(())
}

/// `z0` is too close to some `z_i` for `(L − z0 I)⁻¹` to be usable.
fn shift_collides(z: &MaterialAssignment, z0: C64) -> bool {
    let scale = z.iter().map(|x| x.norm()).fold(z0.norm(), f64::max).max(1.0);
    z.iter().any(|x| (x - z0).norm() <= 1e-12 * scale)
}

/// Matrix of `Z(z)` in the frame of `U`.
pub fn solve_z(c: &ZCollection, z: &MaterialAssignment, method: Method) -> Result<AssociatedEval, SolveError> {
    check_arity(c.n(), z)?;
    let value = match method {
        Method::Direct => z_direct(c, z)?,
        Method::Shifted(z0) => z_shifted(c, z, z0)?,
    };
    Ok(AssociatedEval {
        value,
        z: z.to_vec(),
        method,
    })
}

fn z_direct(c: &ZCollection, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    check_nonzero(z)?;
    let h = c.h();
    let linv = weighted_lambdas(c.lambdas(), h, |i| z[i].inv());
    let g02 = c.gamma0() + c.gamma2();
    let a = &g02 * &(&linv * &g02);
    let s = ComplexMatrix::hstack(h, &[c.u().ortho(), c.j().ortho()]);
    let x = restricted_inverse(&a, &s, c.tol()).map_err(|_| SolveError::SingularL)?;
    Ok(c.u_coords() * &(&x * c.u_frame()))
}

fn z_shifted(c: &ZCollection, z: &MaterialAssignment, z0: C64) -> Result<ComplexMatrix, SolveError> {
    if z0.norm() == 0.0 {
        return Err(SolveError::SingularResolvent(z0));
    }
    let h = c.h();
    let l = c.l_operator(z)?;
    let id = ComplexMatrix::identity(h);
    let d = &l - &id.scale(z0);
    let r = id.scale(z0) + c.gamma1() * &d;
    if !is_nonsingular(&r, c.tol()) {
        return Err(SolveError::SingularResolvent(z0));
    }
    let x = solve_linear(&r, c.u_frame(), c.tol()).map_err(|_| SolveError::SingularResolvent(z0))?;
    Ok((c.u_coords() * &(&l * &x)).scale(z0))
}

/// Matrix of `Y(z)` in the frame of `V`.
pub fn solve_y(c: &YCollection, z: &MaterialAssignment, method: Method) -> Result<AssociatedEval, SolveError> {
    check_arity(c.n(), z)?;
    let value = match method {
        Method::Direct => y_direct(c, z)?,
        Method::Shifted(z0) => y_shifted(c, z, z0)?,
    };
    Ok(AssociatedEval {
        value,
        z: z.to_vec(),
        method,
    })
}

fn y_direct(c: &YCollection, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    check_nonzero(z)?;
    let k = c.k();
    if c.j().dim() == 0 {
        return Ok(ComplexMatrix::zeros(c.m(), c.m()));
    }
    let linv = weighted_lambdas(c.lambdas(), k, |i| z[i].inv());
    let a = c.gamma2() * &(&linv * c.gamma2());
    let x = restricted_inverse(&a, c.j().ortho(), c.tol()).map_err(|_| SolveError::SingularOnJ)?;
    Ok(c.v_coords() * &(&x * &(c.gamma2() * c.v_frame())))
}

fn y_shifted(c: &YCollection, z: &MaterialAssignment, z0: C64) -> Result<ComplexMatrix, SolveError> {
    if z0.norm() == 0.0 || shift_collides(z, z0) {
        return Err(SolveError::SingularResolvent(z0));
    }
    let k = c.k();
    let resolvent = weighted_lambdas(c.lambdas(), k, |i| z0 / (z[i] - z0));
    let r = c.gamma1() + &resolvent;
    if !is_nonsingular(&r, c.tol()) {
        return Err(SolveError::SingularResolvent(z0));
    }
    let x = solve_linear(&r, c.v_frame(), c.tol()).map_err(|_| SolveError::SingularResolvent(z0))?;
    let m = c.m();
    Ok((c.v_coords() * &x).scale(z0) - ComplexMatrix::identity(m).scale(z0))
}

/// Assembles `F` from the blocks of `Y` (input ports first).
pub fn f_from_y(y: &ComplexMatrix, half: usize, tol: &Tolerance) -> Result<ComplexMatrix, SolveError> {
    let yii = y.submatrix(0, 0, half, half);
    let yio = y.submatrix(0, half, half, half);
    let yoi = y.submatrix(half, 0, half, half);
    let yoo = y.submatrix(half, half, half, half);
    let inv = inverse(&yio, tol).map_err(|_| SolveError::SingularCoupling)?;
    let fee = -(&inv * &yii);
    let fej = -&inv;
    let yoo_inv = &yoo * &inv;
    let fje = &yoo_inv * &yii - &yoi;
    let fjj = yoo_inv;
    Ok(blocks(half, [&fee, &fej, &fje, &fjj]))
}

/// Recovers `Y` from `F`; inverse of [`f_from_y`].
pub fn y_from_f_matrix(f: &ComplexMatrix, half: usize, tol: &Tolerance) -> Result<ComplexMatrix, SolveError> {
    let fee = f.submatrix(0, 0, half, half);
    let fej = f.submatrix(0, half, half, half);
    let fje = f.submatrix(half, 0, half, half);
    let fjj = f.submatrix(half, half, half, half);
    let inv = inverse(&fej, tol).map_err(|_| SolveError::SingularFEJ)?;
    let yii = &inv * &fee;
    let yio = -&inv;
    let fjj_inv = &fjj * &inv;
    let yoi = &fjj_inv * &fee - &fje;
    let yoo = -fjj_inv;
    Ok(blocks(half, [&yii, &yio, &yoi, &yoo]))
}

fn blocks(half: usize, b: [&ComplexMatrix; 4]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(2 * half, 2 * half);
    out.set_block(0, 0, b[0]);
    out.set_block(0, half, b[1]);
    out.set_block(half, 0, b[2]);
    out.set_block(half, half, b[3]);
    out
}

/// `F(z)` of a superfunction, blocks `[[F^EE, F^EJ], [F^JE, F^JJ]]`.
pub fn solve_superfunction(
    s: &Superfunction,
    z: &MaterialAssignment,
    method: Method,
) -> Result<AssociatedEval, SolveError> {
    check_arity(s.base().n(), z)?;
    let value = match solve_y(s.base(), z, method) {
        Ok(y) => f_from_y(&y.value, s.half(), s.base().tol())?,
        Err(SolveError::SingularOnJ | SolveError::SingularResolvent(_)) => f_port_system(s, z)?,
        Err(e) => return Err(e),
    };
    Ok(AssociatedEval {
        value,
        z: z.to_vec(),
        method,
    })
}

/// `F(z)` from the superfunction problem itself: unknown coefficients of
/// `E ∈ E` and `J ∈ J` with prescribed input ports and `J_2 = L E_2`.
///
/// Works when `H` is empty or `Y` does not exist (e.g. identity superfunctions).
pub fn f_port_system(s: &Superfunction, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    let c = s.base();
    check_arity(c.n(), z)?;
    let tol = c.tol();
    let (k, m, half) = (c.k(), c.m(), s.half());
    let (e, j) = (c.e().ortho(), c.j().ortho());
    let (de, dj) = (e.cols(), j.cols());
    let split = crate::collections::split_coordinates(c);
    let vin = split.v.row_range(0, half);
    let vout = split.v.row_range(half, half);
    let hz = ComplexMatrix::diagonal(&split.h_weights(z));
    let mut a = ComplexMatrix::zeros(k, k);
    a.set_block(0, 0, &(&vin * e));
    a.set_block(half, de, &(&vin * j));
    a.set_block(m, 0, &-(&hz * &(&split.h * e)));
    a.set_block(m, de, &(&split.h * j));
    let mut rhs = ComplexMatrix::zeros(k, m);
    rhs.set_block(0, 0, &ComplexMatrix::identity(m));
    if !is_nonsingular(&a, tol) {
        return Err(SolveError::SingularCoupling);
    }
    let x = solve_linear(&a, &rhs, tol).map_err(|_| SolveError::SingularCoupling)?;
    let eo = &vout * &(e * &x.row_range(0, de));
    let jo = &vout * &(j * &x.row_range(de, dj));
    Ok(ComplexMatrix::vstack(m, &[&eo, &jo]))
}

/// `Y` whose superfunction matrix is `f`.
pub fn y_from_f(f: &AssociatedEval, tol: &Tolerance) -> Result<AssociatedEval, SolveError> {
    let half = f.value.rows() / 2;
    Ok(AssociatedEval {
        value: y_from_f_matrix(&f.value, half, tol)?,
        z: f.z.clone(),
        method: f.method,
    })
}

fn with_ladder<T>(mut f: impl FnMut(Method) -> Result<T, SolveError>) -> Result<T, SolveError> {
    let mut last = None;
    for z0 in SHIFT_LADDER {
        match f(Method::Shifted(z0)) {
            Err(e @ SolveError::SingularResolvent(_)) => last = Some(e),
            other => return other,
        }
    }
    // Every shift failed; the direct formula needs no shift.
    match f(Method::Direct) {
        Ok(v) => Ok(v),
        Err(_) => Err(last.expect("ladder is nonempty")),
    }
}

/// `Z(z)` by the shifted formula, walking [`SHIFT_LADDER`] on singular resolvents
/// and falling back to the direct formula.
pub fn eval_z(c: &ZCollection, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    with_ladder(|m| solve_z(c, z, m).map(|e| e.value))
}

/// `Y(z)` by the shifted formula, walking [`SHIFT_LADDER`] on singular resolvents
/// and falling back to the direct formula.
pub fn eval_y(c: &YCollection, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    with_ladder(|m| solve_y(c, z, m).map(|e| e.value))
}

/// `F(z)` by the shifted formula, walking [`SHIFT_LADDER`] on singular resolvents
/// and falling back to the direct formula.
pub fn eval_f(s: &Superfunction, z: &MaterialAssignment) -> Result<ComplexMatrix, SolveError> {
    with_ladder(|m| solve_superfunction(s, z, m).map(|e| e.value))
}

/// Partial sums of the resolvent series around `z0`.
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    /// `partial_z[k]` is the sum through order `k`; order 0 is `z0 I`.
    pub partial_z: Vec<ComplexMatrix>,
    /// `E` fields (columns, one per frame vector of `U`) at the final order.
    pub e_fields: ComplexMatrix,
    /// Norms of the successive correction terms.
    pub term_norms: Vec<f64>,
}

impl SeriesExpansion {
    pub fn last(&self) -> &ComplexMatrix {
        self.partial_z.last().expect("order 0 is always present")
    }
}

const DIVERGENCE_WINDOW: usize = 10;

/// Expands `Z = z0Γ0 + Σ_{j≥0} Γ0(L − z0I)[−Γ1(L − z0I)/z0]^j Γ0` and
/// `E = Σ_{j≥1}[−Γ1(L − z0I)/z0]^j e` through `order` terms.
pub fn series_expand(c: &ZCollection, z: &MaterialAssignment, z0: C64, order: usize) -> Result<SeriesExpansion, SolveError> {
    check_arity(c.n(), z)?;
    if z0.norm() == 0.0 {
        return Err(SolveError::SingularResolvent(z0));
    }
    let h = c.h();
    let m = c.m();
    let d = c.l_operator(z)? - ComplexMatrix::identity(h).scale(z0);
    let x = (c.gamma1() * &d).scale(-z0.inv());
    let left = c.u_coords() * &d;
    let mut power = c.u_frame().clone();
    let mut e_fields = ComplexMatrix::zeros(h, m);
    let mut acc = ComplexMatrix::identity(m).scale(z0);
    let mut partial_z = vec![acc.clone()];
    let mut term_norms = Vec::with_capacity(order);
    for k in 0..order {
        let term = &left * &power;
        let norm = term.frobenius_norm();
        acc += &term;
        partial_z.push(acc.clone());
        term_norms.push(norm);
        power = &x * &power;
        e_fields += &power;
        let w = term_norms.len();
        if w > DIVERGENCE_WINDOW && norm > 1e-14 {
            let tail = &term_norms[w - DIVERGENCE_WINDOW..];
            if tail.windows(2).all(|p| p[1] >= p[0]) {
                return Err(SolveError::Divergent(k + 1));
            }
        }
    }
    Ok(SeriesExpansion {
        partial_z,
        e_fields,
        term_norms,
    })
}

/// Random point with `|z_i|` in `[0.5, 2]` and arbitrary phase.
pub fn annulus_point<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let r = rng.random_range(0.5..2.0);
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            c64(r * t.cos(), r * t.sin())
        })
        .collect()
}
