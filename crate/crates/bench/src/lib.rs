//! Fixed inputs shared by the benchmarks.

use subalg::random::{rng, y_collection, z_collection};
use subalg::ratfunc::parse;
use subalg::solvers::annulus_point;
use subalg::{MultiRational, YCollection, ZCollection, C64};

pub const SEED: u64 = 0x5eed;

/// A `Z` collection with `dim U = m` over the given phases, and a point to solve at.
pub fn z_case(m: usize, e: usize, phase_dims: &[usize]) -> (ZCollection, Vec<C64>) {
    let mut g = rng(SEED);
    let c = z_collection(&mut g, m, e, phase_dims);
    let z = annulus_point(&mut g, phase_dims.len());
    (c, z)
}

pub fn y_case(m: usize, e: usize, phase_dims: &[usize]) -> (YCollection, Vec<C64>) {
    let mut g = rng(SEED);
    let c = y_collection(&mut g, m, e, phase_dims);
    let z = annulus_point(&mut g, phase_dims.len());
    (c, z)
}

pub fn targets() -> Vec<(&'static str, MultiRational)> {
    [("z1*z2/z3", 3), ("z1^2/z2", 2), ("(z1^2 + 3*z1*z2 - z2^2)/(2*z1 + z2)", 2), ("(z1^3 - 2*z1*z2*z3 + 2*z3^3)/(z1*z2 + z3^2 - z2^2 + z2*z3)", 3)]
        .into_iter()
        .map(|(s, n)| (s, parse(s, n).expect("valid target")))
        .collect()
}
