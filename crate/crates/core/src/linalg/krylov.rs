//! Right-preconditioned BiCGSTAB.
//!
//! Right preconditioning keeps the recurrence residual equal to the true
//! residual `b - M x` (up to rounding), and convergence is only declared after
//! the true residual has been recomputed from scratch. If the recurrence has
//! drifted, the iteration is refreshed from the true residual and continues.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    BiCgStab,
    BiCgStabJacobi,
    DenseLu,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::BiCgStab => "bicgstab",
            SolveMethod::BiCgStabJacobi => "bicgstab+jacobi",
            SolveMethod::DenseLu => "dense-lu",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - M x|| / ||b||`, recomputed from the returned `x`.
    pub residual_norm: f64,
    pub converged: bool,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Defaults to `10 n` when `None`.
    pub max_iter: Option<usize>,
    pub jacobi: bool,
    /// Retry with a dense direct solve when the Krylov iteration fails.
    pub dense_fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            jacobi: true,
            dense_fallback: false,
        }
    }
}

/// Unpreconditioned BiCGSTAB from a zero initial guess.
pub fn solve_krylov(
    m: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let opts = SolverOptions {
        tol,
        max_iter: Some(max_iter),
        jacobi: false,
        dense_fallback: false,
    };
    bicgstab(m, rhs, None, &opts)
}

pub fn bicgstab(
    m: &SparseMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = m.dim();
    if rhs.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::Shape(format!("system of size {n} with mismatched vectors")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let method = if opts.jacobi {
        SolveMethod::BiCgStabJacobi
    } else {
        SolveMethod::BiCgStab
    };

    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual_norm: 0.0,
                converged: true,
                method,
            },
        ));
    }

    let inv_diag: Vec<f64> = if opts.jacobi {
        m.diagonal()
            .iter()
            .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect()
    } else {
        vec![1.0; n]
    };
    let precondition = |v: &[f64], out: &mut [f64]| {
        for ((o, a), d) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = a * d;
        }
    };

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    true_residual(m, rhs, &x, &mut r);
    let target = opts.tol * b_norm;
    let report = |iterations, res: f64| SolveReport {
        iterations,
        residual_norm: res / b_norm,
        converged: res <= target,
        method,
    };

    let mut res = norm2(&r);
    if res <= target {
        return Ok((x, report(0, res)));
    }

    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut fresh = true;

    for iter in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho.abs() <= f64::EPSILON * f64::EPSILON * norm2(&r_hat) * norm2(&r) {
            if fresh {
                return Err(Error::Breakdown(report(iter - 1, res)));
            }
            refresh(m, rhs, &x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho_old, alpha, omega) = (1.0, 1.0, 1.0);
            fresh = true;
            continue;
        }
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precondition(&p, &mut p_hat);
        m.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(Error::Breakdown(report(iter, res)));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }

        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            res = true_residual(m, rhs, &x, &mut r);
            if res <= target {
                return Ok((x, report(iter, res)));
            }
            refresh(m, rhs, &x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho_old, alpha, omega) = (1.0, 1.0, 1.0);
            fresh = true;
            continue;
        }

        precondition(&s, &mut s_hat);
        m.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
        if !res.is_finite() {
            return Err(Error::Breakdown(report(iter, res)));
        }
        if res <= target {
            res = true_residual(m, rhs, &x, &mut r);
            if res <= target {
                return Ok((x, report(iter, res)));
            }
            refresh(m, rhs, &x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho_old, alpha, omega) = (1.0, 1.0, 1.0);
            fresh = true;
            continue;
        }
        if omega == 0.0 {
            return Err(Error::Breakdown(report(iter, res)));
        }
        rho_old = rho;
        fresh = false;
    }

    let res = true_residual(m, rhs, &x, &mut r);
    Err(Error::NotConverged(report(max_iter, res)))
}

fn true_residual(m: &SparseMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    m.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

fn refresh(
    m: &SparseMatrix,
    b: &[f64],
    x: &[f64],
    r: &mut [f64],
    r_hat: &mut [f64],
    p: &mut [f64],
    v: &mut [f64],
) {
    true_residual(m, b, x, r);
    r_hat.copy_from_slice(r);
    p.iter_mut().for_each(|e| *e = 0.0);
    v.iter_mut().for_each(|e| *e = 0.0);
}
