//! Storage and solvers for the per-step linear systems.
//!
//! The step matrices are nonsymmetric but positive definite in the sense
//! `(M y, y) > 0`, so a stabilized biconjugate-gradient iteration is the
//! default; the dense LU path is the small-scale oracle.

mod dense;
mod krylov;
mod sparse;

pub use dense::{solve_dense, solve_dense_capped, DenseMatrix, DEFAULT_DENSE_CAP};
pub use krylov::{bicgstab, solve_krylov, SolveMethod, SolveReport, SolverOptions};
pub use sparse::SparseMatrix;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
