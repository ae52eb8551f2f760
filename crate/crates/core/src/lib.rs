//! Subspace collections and their associated functions.
//!
//! A Z(n) collection splits a space as `U ⊕ E ⊕ J` and as `P_1 ⊕ … ⊕ P_n`;
//! a Y(n) collection splits it as `E ⊕ J` and as `V ⊕ P_1 ⊕ … ⊕ P_n`.
//! Solving the constitutive problem `J = L E` with `L = Σ z_i Λ_i` yields a
//! homogeneous degree-one rational matrix function of `z`. This crate builds
//! such collections, evaluates their functions, combines them (sums,
//! products, substitution, duality, inverses, …), prunes and reduces them,
//! and compiles multivariate rational functions into collections that
//! realize them.

pub mod numcore;
pub mod spaces;
pub mod collections;
pub mod atoms;
pub mod random;
pub mod solvers;
pub mod algebra;
pub mod reduction;
pub mod ratfunc;
pub mod hexmap;

pub use num_complex::Complex64;
pub use numcore::{c64, re, ComplexMatrix, LinalgError, Tolerance, C64};
pub use spaces::{DirectSum, SpaceError, Subspace};
pub use collections::{AnyCollection, CollectionError, MaterialAssignment, Superfunction, ValidationReport, YCollection, ZCollection};
pub use solvers::{AssociatedEval, Method, SolveError};
pub use algebra::{AlgebraError, PortMaps, ScalingVector};
pub use reduction::{CFLevel, CFStop, ContinuedFraction, PruneReport, ReductionError, ReductionParams};
pub use ratfunc::{MultiPoly, MultiRational, OneVarParams, Parity, RatFuncError, RealizationCertificate};
pub use hexmap::{hex_coords, pole_trajectory, Grid, HexError, HexPoint, PolePoint, PoleTrajectory};
