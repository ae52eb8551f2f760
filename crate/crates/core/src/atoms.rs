//! Small explicit collections with closed-form associated functions.

use crate::collections::{CollectionError, YCollection, ZCollection};
use crate::numcore::{null_space, ComplexMatrix, Tolerance, C64};
use crate::spaces::Subspace;

/// One-dimensional `Y(n)` collection on `C^{n+1}` with basis `p_0 ∈ V`,
/// `p_i ∈ P_i`.
///
/// `E` is spanned by `p_0 + Σ e_i p_i` and `J` is the hyperplane
/// `x_0 + Σ w_i x_i = 0`, so that `Y = Σ w_i e_i z_i`.
pub fn one_dim_y(e: &[C64], w: &[C64], tol: &Tolerance) -> Result<YCollection, CollectionError> {
    assert_eq!(e.len(), w.len(), "one coefficient per phase");
    let k = e.len() + 1;
    let mut ev = vec![C64::new(1.0, 0.0)];
    ev.extend_from_slice(e);
    let mut wr = vec![C64::new(1.0, 0.0)];
    wr.extend_from_slice(w);
    let j = null_space(&ComplexMatrix::from_rows(&[wr]), tol);
    YCollection::new(
        ComplexMatrix::identity(k).column_range(0, 1),
        Subspace::span_of(k, &[ev], tol),
        Subspace::span(&j, tol),
        (1..k).map(|i| Subspace::coordinate(k, &[i])).collect(),
        tol,
    )
}

/// `Y(1)` collection on `C^{2m}` with `Y(z_1) = z_1 A`.
///
/// `V` is spanned by the first `m` basis vectors `p_k` and `P_1` by the
/// last `m` vectors `q_k`; `E = span{p_k + q_k}` and
/// `J = span{q_l − Σ_k A_kl p_k}`. Requires `−1` not to be an eigenvalue of `A`.
pub fn linear_y(a: &ComplexMatrix, tol: &Tolerance) -> Result<YCollection, CollectionError> {
    let m = a.rows();
    let k = 2 * m;
    let id = ComplexMatrix::identity(m);
    let e = ComplexMatrix::vstack(m, &[&id, &id]);
    let j = ComplexMatrix::vstack(m, &[&(-a), &id]);
    YCollection::new(
        ComplexMatrix::identity(k).column_range(0, m),
        Subspace::span(&e, tol),
        Subspace::span(&j, tol),
        vec![Subspace::coordinate(k, &(m..k).collect::<Vec<_>>())],
        tol,
    )
}

/// `Z(2)` collection on `C^3` with basis `U_0, E_0, J_0` (the standard
/// basis), `P_2 = span(P)` and `P_1 = {x : W·x = 0}`.
///
/// Its function is `z_1 + (z_2 − z_1) W_U P_U / (W·P + W_E P_E (z_2 − z_1)/z_1)`.
pub fn z2_collection(p: [C64; 3], w: [C64; 3], tol: &Tolerance) -> Result<ZCollection, CollectionError> {
    let p1 = null_space(&ComplexMatrix::from_rows(&[w.to_vec()]), tol);
    ZCollection::new(
        ComplexMatrix::identity(3).column_range(0, 1),
        Subspace::coordinate(3, &[1]),
        Subspace::coordinate(3, &[2]),
        vec![Subspace::span(&p1, tol), Subspace::span_of(3, &[p.to_vec()], tol)],
        tol,
    )
}

/// Closed form of the [`z2_collection`] function.
pub fn z2_value(p: [C64; 3], w: [C64; 3], z1: C64, z2: C64) -> C64 {
    let wp = w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
    z1 + (z2 - z1) * w[0] * p[0] / (wp + w[1] * p[1] * (z2 - z1) / z1)
}
