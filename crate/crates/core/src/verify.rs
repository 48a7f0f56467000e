//! Independent oracles and experiment harnesses.
//!
//! Dense operator matrices are built column by column from the matrix-free
//! stencils, so they do not share code with [`OperatorSet::assemble`]. The
//! reference propagator `exp(-tau A)` uses scaling and squaring of a Taylor
//! series and is used to measure the time error of the schemes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{DiffusionField, ReactionField};
use crate::grid::{inner_product, norm, Grid2D, GridField};
use crate::linalg::{bicgstab, norm2, solve_dense, DenseMatrix, SolverOptions};
use crate::operators::{Combination, OperatorSet, ReactionPart};
use crate::problem::{OperatorSource, Problem, VelocityPreset};
use crate::schemes::{
    integrate, step_exp_transform, step_explicit_implicit, step_standard, ImplicitConvection,
    SchemeConfig, SchemeKind, TimeGrid,
};

/// Node cap for dense oracles (a 64 x 64 grid).
pub const DENSE_NODE_CAP: usize = 64 * 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    D,
    C,
    C0,
    R,
    A,
}

impl OperatorKind {
    fn combination(self) -> Combination {
        let mut c = Combination::default();
        match self {
            OperatorKind::D => c.diffusion = 1.0,
            OperatorKind::C => c.convection = 1.0,
            OperatorKind::C0 => c.convection_symmetric = 1.0,
            OperatorKind::R => c.reaction = 1.0,
            OperatorKind::A => return Combination::a(),
        }
        c
    }
}

/// Dense matrix whose column `j` is the operator applied to the `j`-th basis
/// vector.
pub fn dense_operator(set: &OperatorSet, which: OperatorKind) -> Result<DenseMatrix> {
    dense_combination(set, &which.combination())
}

pub fn dense_combination(set: &OperatorSet, combo: &Combination) -> Result<DenseMatrix> {
    let n = set.grid().len();
    if n > DENSE_NODE_CAP {
        return Err(Error::CapExceeded { n, cap: DENSE_NODE_CAP });
    }
    let mut m = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        set.apply_slice(combo, &e, &mut col);
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
        e[j] = 0.0;
    }
    Ok(m)
}

/// `exp(-tau A)` by scaling and squaring a truncated Taylor series.
pub fn reference_propagator(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    let n = a.rows();
    let m = a.scaled(-tau);
    let norm = m.norm_inf();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m.scaled(0.5_f64.powi(squarings));
    let mut result = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&x).scaled(1.0 / k as f64);
        result = result.add_scaled(1.0, &term);
        if term.max_abs() <= 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// `h` (max spacing) or `tau`.
    pub parameter: f64,
    pub error: f64,
    /// `log2(e_prev / e)`; `None` on the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub axis: Axis,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    fn from_errors(axis: Axis, data: Vec<(f64, f64)>) -> Self {
        let rows = data
            .iter()
            .enumerate()
            .map(|(i, &(parameter, error))| ConvergenceRow {
                parameter,
                error,
                order: (i > 0).then(|| (data[i - 1].1 / error).log2()),
            })
            .collect();
        Self { axis, rows }
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn min_order(&self) -> f64 {
        self.orders().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_order(&self) -> f64 {
        self.orders().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let name = match self.axis {
            Axis::Space => "h",
            Axis::Time => "tau",
        };
        let mut out = format!("level,{name},error,order\n");
        for (i, r) in self.rows.iter().enumerate() {
            let order = r.order.map(|o| o.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{i},{},{},{order}", r.parameter, r.error);
        }
        out
    }
}

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type VelFn2 = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Steady manufactured problem `c u + div(v u) - div(k grad u) = f` with an
/// exact solution satisfying the zero-flux boundary condition.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub l1: f64,
    pub l2: f64,
    pub shift: f64,
    pub k: Fn2,
    pub velocity: VelFn2,
    pub exact: Fn2,
    pub source: Fn2,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .field("shift", &self.shift)
            .finish_non_exhaustive()
    }
}

impl ManufacturedProblem {
    /// `u = cos(a x1) cos(b x2)`, `k = 1 + sin(a x1) sin(b x2) / 2`, `v = 0`,
    /// with `a = pi / l1`, `b = pi / l2` and unit shift.
    pub fn steady_diffusion(l1: f64, l2: f64) -> Self {
        Self::build(l1, l2, 0.0, 0.0)
    }

    /// As [`Self::steady_diffusion`] plus the boundary-vanishing compressible
    /// velocity `v = (alpha sin(a x1), beta sin(b x2))`.
    pub fn steady_convection_diffusion(l1: f64, l2: f64, alpha: f64, beta: f64) -> Self {
        Self::build(l1, l2, alpha, beta)
    }

    fn build(l1: f64, l2: f64, alpha: f64, beta: f64) -> Self {
        let (a, b) = (PI / l1, PI / l2);
        let shift = 1.0;
        let exact = move |x1: f64, x2: f64| (a * x1).cos() * (b * x2).cos();
        let k = move |x1: f64, x2: f64| 1.0 + 0.5 * (a * x1).sin() * (b * x2).sin();
        let source = move |x1: f64, x2: f64| {
            let (s1, c1) = (a * x1).sin_cos();
            let (s2, c2) = (b * x2).sin_cos();
            let u = c1 * c2;
            let (ux, uy) = (-a * s1 * c2, -b * c1 * s2);
            let lap = -(a * a + b * b) * u;
            let kk = 1.0 + 0.5 * s1 * s2;
            let (kx, ky) = (0.5 * a * c1 * s2, 0.5 * b * s1 * c2);
            let diffusion = -(kk * lap + kx * ux + ky * uy);
            let (v1, v2) = (alpha * s1, beta * s2);
            let div_v = alpha * a * c1 + beta * b * c2;
            let convection = u * div_v + v1 * ux + v2 * uy;
            shift * u + convection + diffusion
        };
        Self {
            l1,
            l2,
            shift,
            k: Arc::new(k),
            velocity: Arc::new(move |x1, x2| (alpha * (a * x1).sin(), beta * (b * x2).sin())),
            exact: Arc::new(exact),
            source: Arc::new(source),
        }
    }

    /// Discrete solution of `(shift E + C + D) u = f` on an `n1 x n2` grid and
    /// its `H`-norm error against the exact solution.
    pub fn solve_error(&self, n1: usize, n2: usize) -> Result<f64> {
        let grid = Grid2D::new(self.l1, self.l2, n1, n2)?;
        let k = DiffusionField::sample(grid, |x1, x2| (self.k)(x1, x2))?;
        let v = crate::fields::VelocityField::from_fn(grid, |x1, x2| (self.velocity)(x1, x2))?;
        let set = OperatorSet::new(k, v)?;
        let matrix = set.assemble(&Combination {
            identity: self.shift,
            ..Combination::a()
        })?;
        let f = GridField::sample(grid, |x1, x2| (self.source)(x1, x2))?;
        let opts = SolverOptions {
            tol: 1e-13,
            ..SolverOptions::default()
        };
        let (u, _) = bicgstab(&matrix, f.values(), None, &opts)?;
        let mut err = GridField::from_values(grid, u)?;
        err.axpy(-1.0, &GridField::sample(grid, |x1, x2| (self.exact)(x1, x2))?)?;
        Ok(norm(&err))
    }
}

/// What to refine in a convergence study.
pub enum ConvergenceSetup<'a> {
    /// Steady manufactured problem on grids `base_n * 2^level` per direction.
    Space {
        problem: &'a ManufacturedProblem,
        base_n1: usize,
        base_n2: usize,
    },
    /// Fixed grid; `base_steps * 2^level` steps to `t_end`, compared with the
    /// same scheme at `reference_factor` times the finest step count.
    Time {
        source: &'a dyn OperatorSource,
        initial: &'a GridField,
        scheme: SchemeConfig,
        t_end: f64,
        base_steps: usize,
        reference_factor: usize,
    },
}

pub fn convergence_study(setup: &ConvergenceSetup<'_>, levels: usize) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 levels, got {levels}")));
    }
    match *setup {
        ConvergenceSetup::Space {
            problem,
            base_n1,
            base_n2,
        } => {
            let mut data = Vec::with_capacity(levels);
            for level in 0..levels {
                let (n1, n2) = (base_n1 << level, base_n2 << level);
                let h = (problem.l1 / n1 as f64).max(problem.l2 / n2 as f64);
                data.push((h, problem.solve_error(n1, n2)?));
            }
            Ok(ConvergenceTable::from_errors(Axis::Space, data))
        }
        ConvergenceSetup::Time {
            source,
            initial,
            scheme,
            t_end,
            base_steps,
            reference_factor,
        } => {
            let finest = base_steps << (levels - 1);
            let reference = integrate(
                &scheme,
                source,
                initial,
                &TimeGrid::uniform(t_end, finest * reference_factor)?,
            )?
            .final_field;
            let mut data = Vec::with_capacity(levels);
            for level in 0..levels {
                let tg = TimeGrid::uniform(t_end, base_steps << level)?;
                let mut err = integrate(&scheme, source, initial, &tg)?.final_field;
                err.axpy(-1.0, &reference)?;
                data.push((tg.tau(), norm(&err)));
            }
            Ok(ConvergenceTable::from_errors(Axis::Time, data))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub scheme: SchemeKind,
    pub sigma: f64,
    pub tau: f64,
    pub tau_delta: f64,
    pub delta: f64,
    pub steps_completed: usize,
    pub max_ratio: f64,
    /// The scheme's own per-step envelope.
    pub rho: f64,
    pub violations: usize,
    pub blown_up: bool,
    pub failure: Option<String>,
}

impl StabilityRow {
    pub fn completed(&self, steps: usize) -> bool {
        self.failure.is_none() && self.steps_completed == steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub steps: usize,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// `exp(delta tau) >= 1 + delta tau` on every row.
    pub fn envelopes_ordered(&self) -> bool {
        self.rows
            .iter()
            .all(|r| SchemeKind::ExpTransform.envelope(r.delta, r.tau) >= SchemeKind::ExplicitImplicit.envelope(r.delta, r.tau))
    }

    pub fn find(&self, scheme: SchemeKind, sigma: f64, tau_delta: f64) -> Option<&StabilityRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.sigma == sigma && r.tau_delta == tau_delta)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scheme,sigma,tau,tau_delta,delta,steps_completed,max_ratio,rho,violations,blown_up,failure\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scheme.name(),
                r.sigma,
                r.tau,
                r.tau_delta,
                r.delta,
                r.steps_completed,
                r.max_ratio,
                r.rho,
                r.violations,
                u8::from(r.blown_up),
                r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            );
        }
        out
    }
}

/// Run each scheme at each `tau = tau_delta / delta` for `steps` steps.
/// Runs renormalize every step so that exponential growth is measured
/// without overflow; blow-up is recorded, not treated as an error.
pub fn stability_experiment(
    source: &dyn OperatorSource,
    initial: &GridField,
    tau_deltas: &[f64],
    schemes: &[SchemeConfig],
    steps: usize,
) -> Result<StabilityReport> {
    let delta = source.operators_at(0.0)?.delta();
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "stability experiments need a compressible velocity (delta > 0)".into(),
        ));
    }
    let mut rows = Vec::new();
    for config in schemes {
        for &tau_delta in tau_deltas {
            let tau = tau_delta / delta;
            let mut cfg = *config;
            cfg.renormalize = true;
            cfg.stop_on_blowup = false;
            let row = match integrate(&cfg, source, initial, &TimeGrid::new(tau, steps)?) {
                Ok(rep) => StabilityRow {
                    scheme: cfg.kind,
                    sigma: cfg.sigma,
                    tau,
                    tau_delta,
                    delta: rep.deltas.first().copied().unwrap_or(delta),
                    steps_completed: rep.steps_completed,
                    max_ratio: rep.max_ratio(),
                    rho: rep.rho.first().copied().unwrap_or(1.0),
                    violations: rep.violations,
                    blown_up: rep.blown_up,
                    failure: None,
                },
                Err(Error::StepFailed { step, source, partial }) => StabilityRow {
                    scheme: cfg.kind,
                    sigma: cfg.sigma,
                    tau,
                    tau_delta,
                    delta,
                    steps_completed: step,
                    max_ratio: partial.max_ratio(),
                    rho: cfg.kind.envelope(delta, tau),
                    violations: partial.violations,
                    blown_up: partial.blown_up,
                    failure: Some(source.to_string()),
                },
                Err(other) => return Err(other),
            };
            rows.push(row);
        }
    }
    Ok(StabilityReport { steps, rows })
}

/// Outcome of one named built-in check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_values(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random-coefficient operator set on `grid` with the given velocity preset.
pub fn random_operator_set(grid: Grid2D, preset: VelocityPreset, rng: &mut ChaCha8Rng) -> Result<OperatorSet> {
    let k = DiffusionField::new(grid, random_values(rng, grid.len(), 0.5, 2.0))?;
    OperatorSet::new(k, preset.field(grid)?)
}

pub fn random_field(grid: Grid2D, rng: &mut ChaCha8Rng) -> GridField {
    GridField::from_values(grid, random_values(rng, grid.len(), -1.0, 1.0)).expect("finite values")
}

/// Operator-property checks on one set: symmetry and semi-definiteness of
/// `D`, skew-symmetry of `C0`, the `delta` bound on `(C y, y)` and
/// `C = C0 + R`, over `samples` random vectors.
pub fn operator_property_checks(set: &OperatorSet, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let md = dense_operator(set, OperatorKind::D)?;
    let mc0 = dense_operator(set, OperatorKind::C0)?;
    let d_asym = md.add_scaled(-1.0, &md.transpose()).max_abs();
    let c0_sym = mc0.add_scaled(1.0, &mc0.transpose()).max_abs();
    let grid = *set.grid();

    let (mut d_min, mut c_excess, mut decomposition) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64);
    for _ in 0..samples {
        let y = random_field(grid, rng);
        let yy = norm(&y).powi(2);
        d_min = d_min.min(inner_product(&set.apply_d(&y)?, &y)? / yy);
        let cyy = inner_product(&set.apply_c(&y)?, &y)?;
        c_excess = c_excess.max(cyy.abs() / (set.delta() * yy));
        let mut diff = set.apply_c(&y)?;
        diff.axpy(-1.0, &set.apply_c0(&y)?)?;
        diff.axpy(-1.0, &set.apply_r(&y, ReactionPart::Full)?)?;
        decomposition = decomposition.max(diff.max_abs() / y.max_abs());
    }
    Ok(vec![
        CheckOutcome {
            name: "D symmetric",
            passed: d_asym <= 1e-13,
            detail: format!("max |M_D - M_D^T| = {d_asym:.3e}"),
        },
        CheckOutcome {
            name: "D semidefinite",
            passed: d_min >= -1e-12,
            detail: format!("min (Dy,y)/||y||^2 = {d_min:.3e}"),
        },
        CheckOutcome {
            name: "C0 skew",
            passed: c0_sym <= 1e-13,
            detail: format!("max |M_C0 + M_C0^T| = {c0_sym:.3e}"),
        },
        CheckOutcome {
            name: "C delta bound",
            passed: c_excess <= 1.0 + 1e-10,
            detail: format!("max |(Cy,y)| / (delta ||y||^2) = {c_excess:.12}"),
        },
        CheckOutcome {
            name: "C = C0 + R",
            passed: decomposition <= 1e-13,
            detail: format!("max |Cy - C0y - ry| / max|y| = {decomposition:.3e}"),
        },
    ])
}

/// The built-in oracle suite behind the `check` command.
pub fn self_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let grid = Grid2D::unit(8)?;
    let set = random_operator_set(grid, VelocityPreset::LinearDivergent { a: 2.0, b: 1.0 }, &mut rng)?;
    out.extend(operator_property_checks(&set, 100, &mut rng)?);

    // matrix-free vs assembled
    let combo = Combination {
        identity: 1.0,
        convection_symmetric: 0.3,
        diffusion: 0.3,
        reaction_plus: 0.3,
        ..Combination::default()
    };
    let y = random_field(grid, &mut rng);
    let mv = set.assemble(&combo)?.mul_vec(y.values());
    let mf = set.apply(&combo, &y)?;
    let diff = mv.iter().zip(mf.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / mf.max_abs();
    out.push(CheckOutcome {
        name: "assembled = matrix-free",
        passed: diff <= 1e-13,
        detail: format!("relative max difference {diff:.3e}"),
    });

    // Krylov vs dense
    let m = set.assemble(&Combination::shifted_a(1.0, 0.05))?;
    let rhs = random_values(&mut rng, grid.len(), -1.0, 1.0);
    let (x, rep) = bicgstab(&m, &rhs, None, &SolverOptions::default())?;
    let xd = solve_dense(&m, &rhs)?;
    let rel = norm2(&x.iter().zip(&xd).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm2(&xd);
    out.push(CheckOutcome {
        name: "Krylov = dense LU",
        passed: rel <= 1e-8 && rep.converged,
        detail: format!("relative difference {rel:.3e} after {} iterations", rep.iterations),
    });

    // semigroup property of the reference propagator; tau and 2 tau share
    // their scaled matrix, so compare against 3 tau instead
    let a = dense_operator(&set, OperatorKind::A)?;
    let p1 = reference_propagator(&a, 0.01);
    let p2 = reference_propagator(&a, 0.02);
    let p3 = reference_propagator(&a, 0.03);
    let semigroup = p1.matmul(&p2).add_scaled(-1.0, &p3).max_abs() / p3.max_abs();
    out.push(CheckOutcome {
        name: "exp(-3tA) = exp(-tA) exp(-2tA)",
        passed: semigroup <= 1e-10,
        detail: format!("max difference {semigroup:.3e}"),
    });

    // growth envelopes at large steps
    let y0 = random_field(grid, &mut rng);
    for (kind, name) in [
        (SchemeKind::ExpTransform, "exp_transform envelope"),
        (SchemeKind::ExplicitImplicit, "explicit_implicit envelope"),
    ] {
        let mut violations = 0;
        for td in [0.1, 1.0, 10.0, 100.0] {
            let mut cfg = SchemeConfig::new(kind);
            cfg.renormalize = true;
            cfg.violation_tol = 1e-8;
            violations += integrate(&cfg, &set, &y0, &TimeGrid::new(td / set.delta(), 20)?)?.violations;
        }
        out.push(CheckOutcome {
            name,
            passed: violations == 0,
            detail: format!("{violations} violations over tau*delta in {{0.1, 1, 10, 100}}"),
        });
    }

    // tightness witnesses
    let delta = 0.7;
    let toy = OperatorSet::diagonal(ReactionField::new(grid, vec![-delta; grid.len()])?);
    let tau = 0.9;
    let opts = SolverOptions::default();
    let r1 = norm(&step_exp_transform(&toy, &y0, 1.0, tau, delta, None, &opts)?.field) / norm(&y0);
    let r2 = norm(&step_explicit_implicit(&toy, &y0, tau, ImplicitConvection::Symmetric, None, &opts)?.field) / norm(&y0);
    let tight = ((r1 - (delta * tau).exp()).abs() / r1).max((r2 - (1.0 + delta * tau)).abs() / r2);
    out.push(CheckOutcome {
        name: "envelopes attained",
        passed: tight <= 1e-12,
        detail: format!("relative gap {tight:.3e}"),
    });

    // degenerate transform
    let solenoidal = random_operator_set(grid, VelocityPreset::Rotational { amplitude: 1.0 }, &mut rng)?;
    let a = step_standard(&solenoidal, &y0, 0.5, 0.1, None, &opts)?.field;
    let b = step_exp_transform(&solenoidal, &y0, 0.5, 0.1, 0.0, None, &opts)?.field;
    let mut d = a.clone();
    d.axpy(-1.0, &b)?;
    let rel = norm(&d) / norm(&a);
    out.push(CheckOutcome {
        name: "delta = 0 reduces to standard",
        passed: rel <= 1e-13,
        detail: format!("relative difference {rel:.3e}"),
    });

    Ok(out)
}

/// Problem used by the temporal order checks: compressible boundary-vanishing
/// velocity, moderate diffusion, smooth initial data.
pub fn temporal_test_problem(n: usize) -> Result<(Problem, GridField)> {
    let grid = Grid2D::unit(n)?;
    let k = DiffusionField::sample(grid, |x1, x2| 0.05 * (1.0 + 0.5 * x1 * x2))?;
    let problem = Problem::new(k, VelocityPreset::Compressible { a: 1.0, b: 0.5 });
    let y0 = GridField::sample(grid, |x1, x2| 1.0 + (PI * x1).cos() * (PI * x2).cos())?;
    Ok((problem, y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_reaction_is_diagonal() {
        let g = Grid2D::unit(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = random_operator_set(g, VelocityPreset::Compressible { a: 1.0, b: 2.0 }, &mut rng).unwrap();
        let m = dense_operator(&set, OperatorKind::R).unwrap();
        let r = set.reaction(ReactionPart::Full).values();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(m.get(i, j), if i == j { r[i] } else { 0.0 });
            }
        }
    }

    #[test]
    fn dense_laplacian_3x3() {
        let g = Grid2D::unit(3).unwrap();
        let set = OperatorSet::new(
            DiffusionField::constant(g, 1.0).unwrap(),
            crate::fields::VelocityField::zero(g),
        )
        .unwrap();
        let m = dense_operator(&set, OperatorKind::D).unwrap();
        // corner, edge and center rows of the Neumann Laplacian times h^2
        let row = |i: usize| (0..9).map(|j| m.get(i, j) / 9.0).collect::<Vec<_>>();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&row(0), &[2.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(close(&row(1), &[-1.0, 3.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(close(&row(4), &[0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn dense_c0_is_skew() {
        let g = Grid2D::new(1.0, 2.0, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = random_operator_set(g, VelocityPreset::LinearDivergent { a: 1.0, b: -2.0 }, &mut rng).unwrap();
        let m = dense_operator(&set, OperatorKind::C0).unwrap();
        assert!(m.add_scaled(1.0, &m.transpose()).max_abs() <= 1e-14);
    }

    #[test]
    fn dense_cap() {
        let g = Grid2D::unit(65).unwrap();
        let set = OperatorSet::diagonal(ReactionField::zeros(g));
        assert!(matches!(dense_operator(&set, OperatorKind::A), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn propagator_basics() {
        let zero = DenseMatrix::zeros(3, 3);
        assert_eq!(reference_propagator(&zero, 1.0), DenseMatrix::identity(3));

        let diag = [0.5, -1.0, 30.0];
        let p = reference_propagator(&DenseMatrix::from_diagonal(&diag), 0.7);
        for (i, d) in diag.iter().enumerate() {
            let expected = (-0.7 * d).exp();
            assert!((p.get(i, i) - expected).abs() <= 1e-13 * expected.max(1.0));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut a = DenseMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                a.set(i, j, rng.gen_range(-2.0..2.0));
            }
        }
        let p1 = reference_propagator(&a, 0.3);
        let p2 = reference_propagator(&a, 0.6);
        let p3 = reference_propagator(&a, 0.9);
        assert!(p1.matmul(&p1).add_scaled(-1.0, &p2).max_abs() <= 1e-10 * p2.max_abs().max(1.0));
        // 2 tau reuses the scaled matrix of tau; 3 tau does not
        assert!(p1.matmul(&p2).add_scaled(-1.0, &p3).max_abs() <= 1e-10 * p3.max_abs().max(1.0));
    }

    #[test]
    fn crank_nicolson_local_error_is_third_order() {
        // 2x2 grid, hand-built diagonal A = diag(r): one step of sigma = 0.5
        // against the exact propagator; halving tau cuts the error by ~8.
        let g = Grid2D::unit(2).unwrap();
        let set = OperatorSet::diagonal(ReactionField::new(g, vec![1.0, -0.5, 2.0, 0.25]).unwrap());
        let a = dense_operator(&set, OperatorKind::A).unwrap();
        let y = GridField::from_values(g, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let err = |tau: f64| {
            let step = step_standard(&set, &y, 0.5, tau, None, &SolverOptions { tol: 1e-14, ..Default::default() })
                .unwrap()
                .field;
            let exact = reference_propagator(&a, tau).mul_vec(y.values());
            norm2(&step.values().iter().zip(&exact).map(|(s, e)| s - e).collect::<Vec<_>>())
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio.log2() - 3.0).abs() < 0.15, "local order {}", ratio.log2());
    }

    #[test]
    fn self_checks_pass() {
        for c in self_checks(42).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn study_needs_three_levels() {
        let p = ManufacturedProblem::steady_diffusion(1.0, 1.0);
        let setup = ConvergenceSetup::Space {
            problem: &p,
            base_n1: 4,
            base_n2: 4,
        };
        assert!(convergence_study(&setup, 2).is_err());
    }

    #[test]
    fn stability_rows_and_csv() {
        let (problem, y0) = temporal_test_problem(8).unwrap();
        let schemes = [
            SchemeConfig::new(SchemeKind::StandardWeighted).with_sigma(0.0),
            SchemeConfig::new(SchemeKind::ExpTransform),
        ];
        let rep = stability_experiment(&problem, &y0, &[1.0, 10.0], &schemes, 20).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.envelopes_ordered());
        assert!(rep.find(SchemeKind::StandardWeighted, 0.0, 10.0).unwrap().blown_up);
        assert_eq!(rep.find(SchemeKind::ExpTransform, 1.0, 10.0).unwrap().violations, 0);
        assert_eq!(rep.to_csv().lines().count(), 5);
    }
}
