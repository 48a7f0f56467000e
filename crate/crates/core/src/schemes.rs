//! Two-layer time integrators for `dy/dt + A y = phi`, `A = C + D`.
//!
//! * [`SchemeKind::StandardWeighted`]: the usual sigma-weighted scheme,
//!   `(E + s t A) y+ = (E - (1 - s) t A) y + t phi`. Stable for
//!   `sigma >= 1/2` only under a time-step restriction when `A` is indefinite.
//! * [`SchemeKind::ExpTransform`]: weighted scheme applied to
//!   `w = exp(-delta t) y`, whose operator `A + delta E` is non-negative.
//!   Per step `||y+|| <= exp(delta tau) ||y||` for any `tau` when `sigma >= 1/2`.
//! * [`SchemeKind::ExplicitImplicit`]: implicit `C0 + D + R+`, explicit `R-`.
//!   Per step `||y+|| <= (1 + delta tau) ||y||` for any `tau`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, GridField};
use crate::linalg::{bicgstab, solve_dense, SolveMethod, SolveReport, SolverOptions, SparseMatrix};
use crate::operators::{Combination, OperatorSet};
use crate::problem::OperatorSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    StandardWeighted,
    ExpTransform,
    ExplicitImplicit,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::StandardWeighted => "standard_weighted",
            SchemeKind::ExpTransform => "exp_transform",
            SchemeKind::ExplicitImplicit => "explicit_implicit",
        }
    }

    /// Per-step growth factor the scheme is checked against. The standard
    /// scheme has no unconditional bound; it is measured against the growth
    /// rate of the semi-discrete problem, `exp(delta tau)`.
    pub fn envelope(self, delta: f64, tau: f64) -> f64 {
        match self {
            SchemeKind::StandardWeighted | SchemeKind::ExpTransform => (delta * tau).exp(),
            SchemeKind::ExplicitImplicit => 1.0 + delta * tau,
        }
    }
}

/// How `delta` is chosen when the velocity depends on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    /// One constant: the max of `delta(t_n)` over all step times.
    #[default]
    GlobalMax,
    /// `delta(t_n)` of the current step.
    PerStep,
}

/// Convection operator on the implicit side of the explicit-implicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitConvection {
    /// `C0`, with the divergence remainder carried by the split reaction.
    #[default]
    Symmetric,
    /// Full divergent `C`; the reaction term then counts the divergence twice.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, steps: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        Ok(Self { tau, steps })
    }

    /// `steps` equal steps over `(0, t_end]`.
    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one step".into()));
        }
        Self::new(t_end / steps as f64, steps)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    pub fn end(&self) -> f64 {
        self.t(self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub sigma: f64,
    pub delta_policy: DeltaPolicy,
    pub implicit_convection: ImplicitConvection,
    /// Allow a right-hand side under the exponential transform.
    pub source_extension: bool,
    /// Rescale the iterate to unit norm after every step. Only valid for
    /// homogeneous problems; norms are then tracked in log space.
    pub renormalize: bool,
    /// Growth beyond `blowup_factor ||y0||` sets the blow-up flag.
    pub blowup_factor: f64,
    pub stop_on_blowup: bool,
    /// Relative slack in `||y+|| <= rho ||y|| (1 + violation_tol)`.
    pub violation_tol: f64,
    pub solver: SolverOptions,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            sigma: 1.0,
            delta_policy: DeltaPolicy::GlobalMax,
            implicit_convection: ImplicitConvection::Symmetric,
            source_extension: false,
            renormalize: false,
            blowup_factor: 1e12,
            stop_on_blowup: false,
            violation_tol: 1e-10,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Hard errors for invalid settings; returns warnings for settings that
    /// run but void the stability guarantee.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::InvalidArgument(format!("sigma must lie in [0, 1], got {}", self.sigma)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidArgument("blow-up factor must exceed 1".into()));
        }
        let mut warnings = Vec::new();
        if self.kind == SchemeKind::ExpTransform && self.sigma < 0.5 {
            warnings.push(format!(
                "exp_transform with sigma = {} < 0.5 is not unconditionally stable",
                self.sigma
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub field: GridField,
    /// `None` for fully explicit steps.
    pub solve: Option<SolveReport>,
}

fn solve_step(
    matrix: &SparseMatrix,
    rhs: &[f64],
    guess: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    match bicgstab(matrix, rhs, Some(guess), opts) {
        Ok(out) => Ok(out),
        Err(err @ (Error::NotConverged(_) | Error::Breakdown(_))) if opts.dense_fallback => {
            let x = solve_dense(matrix, rhs).map_err(|_| err)?;
            let mut r = matrix.mul_vec(&x);
            r.iter_mut().zip(rhs).for_each(|(ri, bi)| *ri = bi - *ri);
            let b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b.max(f64::MIN_POSITIVE);
            Ok((
                x,
                SolveReport {
                    iterations: 0,
                    residual_norm: res,
                    converged: res <= opts.tol,
                    method: SolveMethod::DenseLu,
                },
            ))
        }
        Err(err) => Err(err),
    }
}

/// Standard weighted step
/// `(E + sigma tau A) y+ = (E - (1 - sigma) tau A) y + tau phi`.
pub fn step_standard(
    set: &OperatorSet,
    y: &GridField,
    sigma: f64,
    tau: f64,
    source: Option<&GridField>,
    opts: &SolverOptions,
) -> Result<StepOutput> {
    let mut rhs = set.apply(&Combination::shifted_a(1.0, -(1.0 - sigma) * tau), y)?;
    if let Some(phi) = source {
        rhs.axpy(tau, phi)?;
    }
    if sigma == 0.0 {
        return Ok(StepOutput {
            field: rhs,
            solve: None,
        });
    }
    let matrix = set.assemble(&Combination::shifted_a(1.0, sigma * tau))?;
    let (x, report) = solve_step(&matrix, rhs.values(), y.values(), opts)?;
    Ok(StepOutput {
        field: GridField::from_values(*y.grid(), x)?,
        solve: Some(report),
    })
}

/// Exponential-transform step
/// `exp(-delta tau) (E + sigma tau At) y+ = (E - (1 - sigma) tau At) y`,
/// `At = A + delta E`.
///
/// With `source`, `tau exp(-delta sigma tau) phi` is added to the right-hand
/// side: the weighted discretization of `dw/dt + At w = exp(-delta t) phi`
/// written back in terms of `y`, with `phi` taken at `t_n + sigma tau`.
pub fn step_exp_transform(
    set: &OperatorSet,
    y: &GridField,
    sigma: f64,
    tau: f64,
    delta: f64,
    source: Option<&GridField>,
    opts: &SolverOptions,
) -> Result<StepOutput> {
    let explicit = Combination {
        identity: 1.0 - (1.0 - sigma) * tau * delta,
        ..Combination::shifted_a(0.0, -(1.0 - sigma) * tau)
    };
    let mut rhs = set.apply(&explicit, y)?;
    if let Some(phi) = source {
        rhs.axpy(tau * (-delta * sigma * tau).exp(), phi)?;
    }
    let growth = (delta * tau).exp();
    let (mut w, solve) = if sigma == 0.0 {
        (rhs, None)
    } else {
        let implicit = Combination {
            identity: 1.0 + sigma * tau * delta,
            ..Combination::shifted_a(0.0, sigma * tau)
        };
        let matrix = set.assemble(&implicit)?;
        let (x, report) = solve_step(&matrix, rhs.values(), y.values(), opts)?;
        (GridField::from_values(*y.grid(), x)?, Some(report))
    };
    w.scale(growth);
    let field = GridField::from_values(*y.grid(), w.into_values())?;
    Ok(StepOutput { field, solve })
}

/// Explicit-implicit step
/// `(E + tau (C0 + D + R+)) y+ = (E - tau R-) y + tau phi`.
pub fn step_explicit_implicit(
    set: &OperatorSet,
    y: &GridField,
    tau: f64,
    convection: ImplicitConvection,
    source: Option<&GridField>,
    opts: &SolverOptions,
) -> Result<StepOutput> {
    let explicit = Combination {
        identity: 1.0,
        reaction_minus: -tau,
        ..Combination::default()
    };
    let mut rhs = set.apply(&explicit, y)?;
    if let Some(phi) = source {
        rhs.axpy(tau, phi)?;
    }
    let mut implicit = Combination {
        identity: 1.0,
        diffusion: tau,
        reaction_plus: tau,
        ..Combination::default()
    };
    match convection {
        ImplicitConvection::Symmetric => implicit.convection_symmetric = tau,
        ImplicitConvection::Divergent => implicit.convection = tau,
    }
    let matrix = set.assemble(&implicit)?;
    let (x, report) = solve_step(&matrix, rhs.values(), y.values(), opts)?;
    Ok(StepOutput {
        field: GridField::from_values(*y.grid(), x)?,
        solve: Some(report),
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: SchemeKind,
    pub sigma: f64,
    pub tau: f64,
    /// `delta` per step as used for the envelope (constant under `GlobalMax`).
    pub deltas: Vec<f64>,
    /// `||y_n||`, `n = 0..=steps_completed`. May overflow to infinity in
    /// renormalized runs; `log_norm_history` stays exact.
    pub norm_history: Vec<f64>,
    pub log_norm_history: Vec<f64>,
    /// Per-step envelope factor `rho_n`.
    pub rho: Vec<f64>,
    /// Per-step ratio `||y_{n+1}|| / ||y_n||`.
    pub ratios: Vec<f64>,
    pub violation_flags: Vec<bool>,
    pub violations: usize,
    pub solver: Vec<Option<SolveReport>>,
    /// Last iterate; unit-normalized when the run renormalizes.
    pub final_field: GridField,
    pub blown_up: bool,
    pub steps_completed: usize,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    /// `prod_{k < n} rho_k`, the bound on `||y_n|| / ||y_0||`.
    pub fn cumulative_envelope(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rho.len() + 1);
        let mut acc = 1.0;
        out.push(acc);
        for r in &self.rho {
            acc *= r;
            out.push(acc);
        }
        out
    }
}

/// Run `tgrid.steps()` steps from `y0`.
pub fn integrate(
    config: &SchemeConfig,
    source: &dyn OperatorSource,
    y0: &GridField,
    tgrid: &TimeGrid,
) -> Result<RunReport> {
    integrate_with(config, source, y0, tgrid, |_, _, _| Ok(()))
}

/// As [`integrate`], calling `observer(n, t_n, y_n)` for the initial field
/// and after every completed step.
pub fn integrate_with<F>(
    config: &SchemeConfig,
    source: &dyn OperatorSource,
    y0: &GridField,
    tgrid: &TimeGrid,
    mut observer: F,
) -> Result<RunReport>
where
    F: FnMut(usize, f64, &GridField) -> Result<()>,
{
    let warnings = config.validate()?;
    let grid = source.grid();
    y0.check_same_grid(&grid)?;
    let tau = tgrid.tau();
    let steps = tgrid.steps();
    let time_dependent = source.is_time_dependent();

    let sets_at = |t: f64| source.operators_at(t);
    let fixed = if time_dependent { None } else { Some(sets_at(0.0)?) };

    let global_delta = match (config.delta_policy, &fixed) {
        (_, Some(set)) => set.delta(),
        (DeltaPolicy::GlobalMax, None) => {
            let mut d = 0.0_f64;
            for n in 0..steps {
                d = d.max(sets_at(tgrid.t(n))?.delta());
            }
            d
        }
        (DeltaPolicy::PerStep, None) => f64::NAN,
    };

    let initial_norm = norm(y0);
    let mut report = RunReport {
        kind: config.kind,
        sigma: config.sigma,
        tau,
        deltas: Vec::with_capacity(steps),
        norm_history: vec![initial_norm],
        log_norm_history: vec![initial_norm.ln()],
        rho: Vec::with_capacity(steps),
        ratios: Vec::with_capacity(steps),
        violation_flags: Vec::with_capacity(steps),
        violations: 0,
        solver: Vec::with_capacity(steps),
        final_field: y0.clone(),
        blown_up: false,
        steps_completed: 0,
        warnings,
    };
    observer(0, 0.0, y0)?;

    let mut y = y0.clone();
    if config.renormalize && initial_norm > 0.0 {
        y.scale(1.0 / initial_norm);
    }
    let blowup_log = config.blowup_factor.ln();

    for n in 0..steps {
        let t = tgrid.t(n);
        let owned;
        let set = match &fixed {
            Some(s) => s,
            None => {
                owned = sets_at(t)?;
                &owned
            }
        };
        let delta = match config.delta_policy {
            DeltaPolicy::GlobalMax if !global_delta.is_nan() => global_delta,
            _ => set.delta(),
        };
        let phi_time = match config.kind {
            SchemeKind::ExplicitImplicit => t + tau,
            _ => t + config.sigma * tau,
        };
        let phi = source.source_at(phi_time)?;
        if phi.is_some() {
            if config.renormalize {
                return Err(Error::InvalidArgument(
                    "renormalized runs require a homogeneous problem".into(),
                ));
            }
            if config.kind == SchemeKind::ExpTransform && !config.source_extension {
                return Err(Error::InvalidArgument(
                    "exp_transform is defined for the homogeneous problem; enable the source extension to add a right-hand side".into(),
                ));
            }
        }

        let stepped = match config.kind {
            SchemeKind::StandardWeighted => step_standard(set, &y, config.sigma, tau, phi.as_ref(), &config.solver),
            SchemeKind::ExpTransform => {
                step_exp_transform(set, &y, config.sigma, tau, delta, phi.as_ref(), &config.solver)
            }
            SchemeKind::ExplicitImplicit => step_explicit_implicit(
                set,
                &y,
                tau,
                config.implicit_convection,
                phi.as_ref(),
                &config.solver,
            ),
        };
        let out = match stepped {
            Ok(out) => out,
            Err(source) => {
                report.final_field = y;
                return Err(Error::StepFailed {
                    step: n,
                    source: Box::new(source),
                    partial: Box::new(report),
                });
            }
        };

        let old = norm(&y);
        let new = norm(&out.field);
        let ratio = if old > 0.0 {
            new / old
        } else if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let rho = config.kind.envelope(delta, tau);
        let violated = ratio > rho * (1.0 + config.violation_tol);
        let log_norm = if config.renormalize {
            report.log_norm_history[n] + ratio.ln()
        } else {
            new.ln()
        };

        report.deltas.push(delta);
        report.rho.push(rho);
        report.ratios.push(ratio);
        report.violation_flags.push(violated);
        report.violations += usize::from(violated);
        report.solver.push(out.solve);
        report.log_norm_history.push(log_norm);
        report.norm_history.push(if config.renormalize { log_norm.exp() } else { new });
        report.steps_completed = n + 1;

        y = out.field;
        observer(n + 1, tgrid.t(n + 1), &y)?;
        if config.renormalize && new > 0.0 {
            y.scale(1.0 / new);
        }
        if initial_norm > 0.0 && log_norm - report.log_norm_history[0] > blowup_log {
            report.blown_up = true;
            if config.stop_on_blowup {
                break;
            }
        }
    }
    report.final_field = y;
    Ok(report)
}
