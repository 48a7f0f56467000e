//! Run configuration read from TOML.
//!
//! ```toml
//! seed = 42
//!
//! [domain]
//! l1 = 1.0
//! l2 = 1.0
//!
//! [grid]
//! n1 = 32
//! n2 = 32
//!
//! [coefficients]
//! diffusion = { kind = "constant", value = 0.01 }
//! velocity = { kind = "linear_divergent", a = 1.0, b = 0.0 }
//! initial = { kind = "cosine", m1 = 1, m2 = 1 }
//!
//! [scheme]
//! kind = "exp_transform"
//! sigma = 1.0
//! tau = 0.01
//! steps = 100
//!
//! [output]
//! dir = "out"
//! snapshot_every = 10
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::DiffusionField;
use crate::grid::{Grid2D, GridField};
use crate::linalg::SolverOptions;
use crate::operators::FaceMean;
use crate::problem::{Problem, VelocitySpec};
use crate::schemes::{DeltaPolicy, ImplicitConvection, SchemeConfig, SchemeKind, TimeGrid};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSection,
    pub grid: GridSection,
    #[serde(default)]
    pub coefficients: Coefficients,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub l1: f64,
    pub l2: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { l1: 1.0, l2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n1: usize,
    pub n2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default = "default_velocity")]
    pub velocity: VelocitySpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub face_mean: FaceMean,
}

fn default_velocity() -> VelocitySpec {
    crate::problem::VelocityPreset::Zero.into()
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            diffusion: DiffusionSpec::default(),
            velocity: default_velocity(),
            initial: InitialSpec::default(),
            source: SourceSpec::default(),
            face_mean: FaceMean::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Constant { value: f64 },
    /// Independent uniform draws in `[min, max]` per node, from the run seed.
    Random { min: f64, max: f64 },
    /// `base (1 + amplitude sin(pi x1/l1) sin(pi x2/l2))`.
    Smooth { base: f64, amplitude: f64 },
    /// Per-node values, `x1` index fastest.
    Table { values: Vec<f64> },
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        DiffusionSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `1 + cos(m1 pi x1/l1) cos(m2 pi x2/l2)`.
    Cosine { m1: u32, m2: u32 },
    Gaussian { x1: f64, x2: f64, width: f64 },
    Constant { value: f64 },
    /// Uniform draws in `[-amplitude, amplitude]` from the run seed.
    Random { amplitude: f64 },
    Table { values: Vec<f64> },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Cosine { m1: 1, m2: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    #[default]
    Zero,
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    #[serde(default = "one")]
    pub sigma: f64,
    pub tau: f64,
    pub steps: usize,
    #[serde(default)]
    pub delta_policy: DeltaPolicy,
    #[serde(default)]
    pub implicit_convection: ImplicitConvection,
    #[serde(default)]
    pub source_extension: bool,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
    #[serde(default)]
    pub stop_on_blowup: bool,
    #[serde(default = "default_violation_tol")]
    pub violation_tol: f64,
}

fn one() -> f64 {
    1.0
}

fn default_blowup() -> f64 {
    1e12
}

fn default_violation_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default = "yes")]
    pub jacobi: bool,
    #[serde(default)]
    pub dense_fallback: bool,
}

fn default_tol() -> f64 {
    1e-10
}

fn yes() -> bool {
    true
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: None,
            jacobi: true,
            dense_fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Runs every listed scheme at `tau = tau_delta / delta` for `steps`
    /// steps on the configured problem.
    Stability {
        tau_delta: Vec<f64>,
        schemes: Vec<SchemeEntry>,
        steps: usize,
    },
    /// `space`: manufactured steady problem on the configured domain, grids
    /// refined from `grid`; `velocity_a`/`velocity_b` scale a boundary-vanishing
    /// compressible velocity. `time`: the configured run with step counts
    /// doubled from `scheme.steps`, against a run `reference_factor` times finer.
    Convergence {
        axis: ConvergenceAxis,
        levels: usize,
        #[serde(default)]
        velocity_a: f64,
        #[serde(default)]
        velocity_b: f64,
        #[serde(default = "default_reference_factor")]
        reference_factor: usize,
    },
}

fn default_reference_factor() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceAxis {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub kind: SchemeKind,
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Write `field_NNNN.csv` every this many steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_dir() -> String {
    "output".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_every: 0,
        }
    }
}

/// Parse and validate. Syntax errors carry the TOML line and column;
/// validation errors name every offending key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn to_toml(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::ConfigParse(e.to_string()))
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut bad = |path: &str, msg: String| errs.push(format!("{path}: {msg}"));

        if self.seed > i64::MAX as u64 {
            bad("seed", format!("must fit a TOML integer (at most {}), got {}", i64::MAX, self.seed));
        }
        for (path, v) in [("domain.l1", self.domain.l1), ("domain.l2", self.domain.l2)] {
            if !positive(v) {
                bad(path, format!("must be positive, got {v}"));
            }
        }
        for (path, v) in [("grid.n1", self.grid.n1), ("grid.n2", self.grid.n2)] {
            if v < 2 {
                bad(path, format!("must be at least 2, got {v}"));
            }
        }
        let nodes = self.grid.n1 * self.grid.n2;

        match &self.coefficients.diffusion {
            DiffusionSpec::Constant { value } if !positive(*value) => {
                bad("coefficients.diffusion.value", format!("must be positive, got {value}"))
            }
            DiffusionSpec::Random { min, max } if !(positive(*min) && max.is_finite() && min <= max) => {
                bad("coefficients.diffusion", format!("need 0 < min <= max, got [{min}, {max}]"))
            }
            DiffusionSpec::Smooth { base, amplitude } => {
                if !positive(*base) {
                    bad("coefficients.diffusion.base", format!("must be positive, got {base}"));
                }
                if !(amplitude.abs() < 1.0) {
                    bad("coefficients.diffusion.amplitude", format!("must lie in (-1, 1), got {amplitude}"));
                }
            }
            DiffusionSpec::Table { values } => {
                if values.len() != nodes {
                    bad("coefficients.diffusion.values", format!("expected {nodes} values, got {}", values.len()));
                }
                if let Some(v) = values.iter().find(|v| !positive(**v)) {
                    bad("coefficients.diffusion.values", format!("must be positive, found {v}"));
                }
            }
            _ => {}
        }

        let vel = &self.coefficients.velocity;
        let params: Vec<f64> = match vel.preset {
            crate::problem::VelocityPreset::Zero => vec![],
            crate::problem::VelocityPreset::Uniform { a, b }
            | crate::problem::VelocityPreset::LinearDivergent { a, b }
            | crate::problem::VelocityPreset::Compressible { a, b } => vec![a, b],
            crate::problem::VelocityPreset::Rotational { amplitude } => vec![amplitude],
        };
        if params.iter().any(|p| !p.is_finite()) {
            bad("coefficients.velocity", "parameters must be finite".into());
        }
        if let Some(m) = vel.modulation {
            if !(m.amplitude.is_finite() && m.frequency.is_finite()) {
                bad("coefficients.velocity.modulation", "parameters must be finite".into());
            }
        }

        match &self.coefficients.initial {
            InitialSpec::Gaussian { x1, x2, width } => {
                if !(x1.is_finite() && x2.is_finite()) {
                    bad("coefficients.initial", "center must be finite".into());
                }
                if !positive(*width) {
                    bad("coefficients.initial.width", format!("must be positive, got {width}"));
                }
            }
            InitialSpec::Constant { value } if !value.is_finite() => {
                bad("coefficients.initial.value", "must be finite".into())
            }
            InitialSpec::Random { amplitude } if !positive(*amplitude) => {
                bad("coefficients.initial.amplitude", format!("must be positive, got {amplitude}"))
            }
            InitialSpec::Table { values } => {
                if values.len() != nodes {
                    bad("coefficients.initial.values", format!("expected {nodes} values, got {}", values.len()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    bad("coefficients.initial.values", "must be finite".into());
                }
            }
            _ => {}
        }

        let s = &self.scheme;
        if let SourceSpec::Constant { value } = self.coefficients.source {
            if !value.is_finite() {
                bad("coefficients.source.value", "must be finite".into());
            }
            if s.renormalize {
                bad("scheme.renormalize", "cannot be combined with a source".into());
            }
            if s.kind == SchemeKind::ExpTransform && !s.source_extension {
                bad("scheme.source_extension", "exp_transform needs it enabled to take a source".into());
            }
        }
        if !(0.0..=1.0).contains(&s.sigma) {
            bad("scheme.sigma", format!("must lie in [0, 1], got {}", s.sigma));
        }
        if !positive(s.tau) {
            bad("scheme.tau", format!("must be positive, got {}", s.tau));
        }
        if !(s.blowup_factor.is_finite() && s.blowup_factor > 1.0) {
            bad("scheme.blowup_factor", format!("must exceed 1, got {}", s.blowup_factor));
        }
        if !(s.violation_tol.is_finite() && s.violation_tol >= 0.0) {
            bad("scheme.violation_tol", format!("must be non-negative, got {}", s.violation_tol));
        }

        if !positive(self.solver.tol) {
            bad("solver.tol", format!("must be positive, got {}", self.solver.tol));
        }
        if self.solver.max_iter == Some(0) {
            bad("solver.max_iter", "must be at least 1".into());
        }

        match &self.experiment {
            Some(Experiment::Stability { tau_delta, schemes, steps }) => {
                if tau_delta.is_empty() || tau_delta.iter().any(|v| !positive(*v)) {
                    bad("experiment.tau_delta", "need a non-empty list of positive values".into());
                }
                if schemes.is_empty() {
                    bad("experiment.schemes", "need at least one scheme".into());
                }
                for (i, e) in schemes.iter().enumerate() {
                    if !(0.0..=1.0).contains(&e.sigma) {
                        bad(&format!("experiment.schemes[{i}].sigma"), format!("must lie in [0, 1], got {}", e.sigma));
                    }
                }
                if *steps == 0 {
                    bad("experiment.steps", "must be at least 1".into());
                }
            }
            Some(Experiment::Convergence {
                axis,
                levels,
                velocity_a,
                velocity_b,
                reference_factor,
            }) => {
                if *levels < 3 {
                    bad("experiment.levels", format!("must be at least 3, got {levels}"));
                }
                if !(velocity_a.is_finite() && velocity_b.is_finite()) {
                    bad("experiment", "velocity_a and velocity_b must be finite".into());
                }
                if *axis == ConvergenceAxis::Time {
                    if *reference_factor < 2 {
                        bad("experiment.reference_factor", format!("must be at least 2, got {reference_factor}"));
                    }
                    if s.steps == 0 {
                        bad("scheme.steps", "time studies need at least one step".into());
                    }
                }
            }
            None => {}
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(errs))
        }
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.domain.l1, self.domain.l2, self.grid.n1, self.grid.n2)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn diffusion(&self) -> Result<DiffusionField> {
        let grid = self.grid()?;
        let (l1, l2) = (grid.l1(), grid.l2());
        match &self.coefficients.diffusion {
            DiffusionSpec::Constant { value } => DiffusionField::constant(grid, *value),
            DiffusionSpec::Random { min, max } => {
                let mut rng = self.rng(1);
                let values = (0..grid.len()).map(|_| rng.gen_range(*min..=*max)).collect();
                DiffusionField::new(grid, values)
            }
            DiffusionSpec::Smooth { base, amplitude } => DiffusionField::sample(grid, |x1, x2| {
                base * (1.0 + amplitude * (PI * x1 / l1).sin() * (PI * x2 / l2).sin())
            }),
            DiffusionSpec::Table { values } => DiffusionField::new(grid, values.clone()),
        }
    }

    pub fn initial(&self) -> Result<GridField> {
        let grid = self.grid()?;
        let (l1, l2) = (grid.l1(), grid.l2());
        match &self.coefficients.initial {
            InitialSpec::Cosine { m1, m2 } => GridField::sample(grid, |x1, x2| {
                1.0 + (*m1 as f64 * PI * x1 / l1).cos() * (*m2 as f64 * PI * x2 / l2).cos()
            }),
            InitialSpec::Gaussian { x1: c1, x2: c2, width } => GridField::sample(grid, |x1, x2| {
                (-((x1 - c1).powi(2) + (x2 - c2).powi(2)) / (width * width)).exp()
            }),
            InitialSpec::Constant { value } => Ok(GridField::constant(grid, *value)),
            InitialSpec::Random { amplitude } => {
                let mut rng = self.rng(2);
                let values = (0..grid.len()).map(|_| rng.gen_range(-*amplitude..=*amplitude)).collect();
                GridField::from_values(grid, values)
            }
            InitialSpec::Table { values } => GridField::from_values(grid, values.clone()),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let problem =
            Problem::new(self.diffusion()?, self.coefficients.velocity).with_face_mean(self.coefficients.face_mean);
        Ok(match self.coefficients.source {
            SourceSpec::Zero => problem,
            SourceSpec::Constant { value } => problem.with_source(Arc::new(move |_, _, _| value)),
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            jacobi: self.solver.jacobi,
            dense_fallback: self.solver.dense_fallback,
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let s = &self.scheme;
        SchemeConfig {
            kind: s.kind,
            sigma: s.sigma,
            delta_policy: s.delta_policy,
            implicit_convection: s.implicit_convection,
            source_extension: s.source_extension,
            renormalize: s.renormalize,
            blowup_factor: s.blowup_factor,
            stop_on_blowup: s.stop_on_blowup,
            violation_tol: s.violation_tol,
            solver: self.solver_options(),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.scheme.tau, self.scheme.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
n1 = 8
n2 = 6

[scheme]
kind = "explicit_implicit"
tau = 0.01
steps = 5
"#;

    #[test]
    fn minimal_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.scheme.sigma, 1.0);
        assert_eq!(c.scheme.delta_policy, DeltaPolicy::GlobalMax);
        assert_eq!(c.coefficients.source, SourceSpec::Zero);
        assert_eq!(c.domain, DomainSection { l1: 1.0, l2: 1.0 });
        assert!(c.experiment.is_none());
    }

    #[test]
    fn sigma_out_of_range_names_key() {
        let text = MINIMAL.replace("tau = 0.01", "tau = 0.01\nsigma = 1.5");
        match parse_config(&text) {
            Err(Error::ConfigInvalid(errs)) => assert!(errs.iter().any(|e| e.starts_with("scheme.sigma"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported() {
        let text = MINIMAL
            .replace("n1 = 8", "n1 = 1")
            .replace("tau = 0.01", "tau = -1.0\nsigma = 2.0");
        let Err(Error::ConfigInvalid(errs)) = parse_config(&text) else {
            panic!("expected validation failure")
        };
        for key in ["grid.n1", "scheme.tau", "scheme.sigma"] {
            assert!(errs.iter().any(|e| e.starts_with(key)), "{key} missing from {errs:?}");
        }
    }

    #[test]
    fn syntax_error_has_location() {
        let err = parse_config("[grid]\nn1 = = 3\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_preset_rejected() {
        let text = format!("{MINIMAL}\n[coefficients]\nvelocity = {{ kind = \"swirl\" }}\n");
        assert!(matches!(parse_config(&text), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn table_length_checked() {
        let text = format!("{MINIMAL}\n[coefficients]\ndiffusion = {{ kind = \"table\", values = [1.0, 2.0] }}\n");
        let Err(Error::ConfigInvalid(errs)) = parse_config(&text) else {
            panic!("expected validation failure")
        };
        assert!(errs[0].starts_with("coefficients.diffusion.values"));
    }

    #[test]
    fn random_fields_follow_seed() {
        let text = format!("{MINIMAL}\n[coefficients]\ndiffusion = {{ kind = \"random\", min = 0.5, max = 2.0 }}\n");
        let mut c = parse_config(&text).unwrap();
        let a = c.diffusion().unwrap();
        assert_eq!(a.values(), c.diffusion().unwrap().values());
        c.seed = 7;
        assert_ne!(a.values(), c.diffusion().unwrap().values());
        assert!(a.values().iter().all(|k| (0.5..=2.0).contains(k)));
    }
}
