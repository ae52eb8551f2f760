//! Seeded random collections for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collections::{Superfunction, YCollection, ZCollection};
use crate::numcore::{c64, re, ComplexMatrix, Tolerance, C64};
use crate::spaces::Subspace;

/// The generator used throughout; seeded runs are reproducible.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex<R: Rng>(rng: &mut R) -> C64 {
    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

/// Splits `C^total` into generic subspaces of the given dimensions.
pub fn generic_split<R: Rng>(rng: &mut R, total: usize, dims: &[usize], tol: &Tolerance) -> Vec<ComplexMatrix> {
    assert_eq!(dims.iter().sum::<usize>(), total, "dimensions must fill the space");
    let basis = loop {
        let b = matrix(rng, total, total);
        if crate::numcore::is_nonsingular(&b, tol) {
            break b;
        }
    };
    let mut out = Vec::with_capacity(dims.len());
    let mut start = 0;
    for &d in dims {
        out.push(basis.column_range(start, d));
        start += d;
    }
    out
}

/// Random Z(n) collection with `dim U = m`, `dim E = e` and the given phase dimensions.
pub fn z_collection<R: Rng>(rng: &mut R, m: usize, e: usize, phase_dims: &[usize]) -> ZCollection {
    let tol = Tolerance::default();
    let h: usize = phase_dims.iter().sum();
    assert!(m + e <= h);
    let uej = generic_split(rng, h, &[m, e, h - m - e], &tol);
    let phases = generic_split(rng, h, phase_dims, &tol);
    ZCollection::new(
        uej[0].clone(),
        Subspace::span(&uej[1], &tol),
        Subspace::span(&uej[2], &tol),
        phases.iter().map(|p| Subspace::span(p, &tol)).collect(),
        &tol,
    )
    .expect("generic subspaces are in direct sum")
}

/// Random Y(n) collection on `C^k` with `dim V = m` and `dim E = e`;
/// the phases fill the complement of `V`.
pub fn y_collection<R: Rng>(rng: &mut R, m: usize, e: usize, phase_dims: &[usize]) -> YCollection {
    let tol = Tolerance::default();
    let k = m + phase_dims.iter().sum::<usize>();
    assert!(e <= k);
    let ej = generic_split(rng, k, &[e, k - e], &tol);
    let mut dims = vec![m];
    dims.extend_from_slice(phase_dims);
    let vp = generic_split(rng, k, &dims, &tol);
    YCollection::new(
        vp[0].clone(),
        Subspace::span(&ej[0], &tol),
        Subspace::span(&ej[1], &tol),
        vp[1..].iter().map(|p| Subspace::span(p, &tol)).collect(),
        &tol,
    )
    .expect("generic subspaces are in direct sum")
}

/// Random superfunction with ports of dimension `half` and `dim E = e`.
pub fn superfunction<R: Rng>(rng: &mut R, half: usize, e: usize, phase_dims: &[usize]) -> Superfunction {
    Superfunction::from_base(y_collection(rng, 2 * half, e, phase_dims)).expect("even port dimension")
}

/// Random real orthogonal Z(n) collection: the phases are coordinate blocks and
/// `U`, `E`, `J` are consecutive columns of a random orthogonal matrix.
pub fn orthogonal_z_collection<R: Rng>(rng: &mut R, m: usize, e: usize, phase_dims: &[usize]) -> ZCollection {
    let tol = Tolerance::default();
    let h: usize = phase_dims.iter().sum();
    assert!(m + e <= h);
    let a = ComplexMatrix::from_fn(h, h, |_, _| re(rng.random_range(-1.0..1.0)));
    let q = Subspace::span(&a, &tol).ortho().clone();
    let mut start = 0;
    let phases = phase_dims
        .iter()
        .map(|&d| {
            let idx: Vec<usize> = (start..start + d).collect();
            start += d;
            Subspace::coordinate(h, &idx)
        })
        .collect();
    ZCollection::new(
        q.column_range(0, m),
        Subspace::span(&q.column_range(m, e), &tol),
        Subspace::span(&q.column_range(m + e, h - m - e), &tol),
        phases,
        &tol,
    )
    .expect("orthogonal subspaces are in direct sum")
}
