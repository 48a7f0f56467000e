//! Velocity presets and time-indexed problem definitions that hand an
//! [`OperatorSet`] to the integrator for every time level.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{DiffusionField, VelocityField};
use crate::grid::{Grid2D, GridField};
use crate::operators::{FaceMean, OperatorSet};

/// Analytic velocity fields sampled on cell faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityPreset {
    Zero,
    /// `v = (a, b)`. Boundary clamping makes the first and last cell layers
    /// compressible.
    Uniform { a: f64, b: f64 },
    /// `v = (a x1, b x2)`, constant divergence `a + b` away from the clamped
    /// boundary faces.
    LinearDivergent { a: f64, b: f64 },
    /// Vortex from the stream function `amplitude sin(pi x1/l1) sin(pi x2/l2)`,
    /// built from vertex differences so it is discretely divergence-free.
    Rotational { amplitude: f64 },
    /// `v = (a sin(pi x1/l1), b sin(pi x2/l2))`; vanishes on the boundary.
    Compressible { a: f64, b: f64 },
}

/// Time modulation `g(t) = 1 + amplitude sin(2 pi frequency t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Modulation {
    pub fn factor(&self, t: f64) -> f64 {
        1.0 + self.amplitude * (2.0 * PI * self.frequency * t).sin()
    }
}

impl VelocityPreset {
    pub fn field(&self, grid: Grid2D) -> Result<VelocityField> {
        let (l1, l2) = (grid.l1(), grid.l2());
        match *self {
            VelocityPreset::Zero => Ok(VelocityField::zero(grid)),
            VelocityPreset::Uniform { a, b } => VelocityField::from_fn(grid, |_, _| (a, b)),
            VelocityPreset::LinearDivergent { a, b } => {
                VelocityField::from_fn(grid, |x1, x2| (a * x1, b * x2))
            }
            VelocityPreset::Rotational { amplitude } => VelocityField::from_stream_function(grid, |x1, x2| {
                amplitude * (PI * x1 / l1).sin() * (PI * x2 / l2).sin()
            }),
            VelocityPreset::Compressible { a, b } => VelocityField::from_fn(grid, |x1, x2| {
                (a * (PI * x1 / l1).sin(), b * (PI * x2 / l2).sin())
            }),
        }
    }
}

/// Velocity preset with optional time modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySpec {
    #[serde(flatten)]
    pub preset: VelocityPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<Modulation>,
}

impl From<VelocityPreset> for VelocitySpec {
    fn from(preset: VelocityPreset) -> Self {
        Self {
            preset,
            modulation: None,
        }
    }
}

impl VelocitySpec {
    pub fn field(&self, grid: Grid2D, t: f64) -> Result<VelocityField> {
        let field = self.preset.field(grid)?;
        let field = match &self.modulation {
            Some(m) => field.scaled(m.factor(t)),
            None => field,
        };
        Ok(field.at_time(t))
    }

    pub fn is_time_dependent(&self) -> bool {
        self.modulation.is_some()
    }
}

pub type VelocityFn = Arc<dyn Fn(f64, f64, f64) -> (f64, f64) + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Velocity {
    Spec(VelocitySpec),
    /// `v(x1, x2, t)`, sampled at faces with boundary clamping.
    Custom { v: VelocityFn, time_dependent: bool },
}

impl fmt::Debug for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Velocity::Spec(s) => f.debug_tuple("Spec").field(s).finish(),
            Velocity::Custom { time_dependent, .. } => f
                .debug_struct("Custom")
                .field("time_dependent", time_dependent)
                .finish_non_exhaustive(),
        }
    }
}

impl Velocity {
    pub fn field(&self, grid: Grid2D, t: f64) -> Result<VelocityField> {
        match self {
            Velocity::Spec(s) => s.field(grid, t),
            Velocity::Custom { v, .. } => Ok(VelocityField::from_fn(grid, |x1, x2| v(x1, x2, t))?.at_time(t)),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            Velocity::Spec(s) => s.is_time_dependent(),
            Velocity::Custom { time_dependent, .. } => *time_dependent,
        }
    }
}

/// Supplies the operators (and optional right-hand side) at a given time.
pub trait OperatorSource {
    fn grid(&self) -> Grid2D;

    fn operators_at(&self, t: f64) -> Result<OperatorSet>;

    fn is_time_dependent(&self) -> bool {
        false
    }

    fn source_at(&self, _t: f64) -> Result<Option<GridField>> {
        Ok(None)
    }
}

impl OperatorSource for OperatorSet {
    fn grid(&self) -> Grid2D {
        *OperatorSet::grid(self)
    }

    fn operators_at(&self, _t: f64) -> Result<OperatorSet> {
        Ok(self.clone())
    }
}

/// Convection-diffusion problem on a fixed grid.
#[derive(Clone, Debug)]
pub struct Problem {
    pub diffusion: DiffusionField,
    pub velocity: Velocity,
    pub face_mean: FaceMean,
    pub source: Option<SourceTerm>,
}

#[derive(Clone)]
pub struct SourceTerm(pub ScalarFn);

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceTerm(..)")
    }
}

impl Problem {
    pub fn new(diffusion: DiffusionField, velocity: impl Into<VelocitySpec>) -> Self {
        Self {
            diffusion,
            velocity: Velocity::Spec(velocity.into()),
            face_mean: FaceMean::Arithmetic,
            source: None,
        }
    }

    pub fn with_custom_velocity(diffusion: DiffusionField, v: VelocityFn, time_dependent: bool) -> Self {
        Self {
            diffusion,
            velocity: Velocity::Custom { v, time_dependent },
            face_mean: FaceMean::Arithmetic,
            source: None,
        }
    }

    pub fn with_source(mut self, f: ScalarFn) -> Self {
        self.source = Some(SourceTerm(f));
        self
    }

    pub fn with_face_mean(mut self, mean: FaceMean) -> Self {
        self.face_mean = mean;
        self
    }
}

impl OperatorSource for Problem {
    fn grid(&self) -> Grid2D {
        *self.diffusion.grid()
    }

    fn operators_at(&self, t: f64) -> Result<OperatorSet> {
        let v = self.velocity.field(OperatorSource::grid(self), t)?;
        OperatorSet::with_face_mean(self.diffusion.clone(), v, self.face_mean)
    }

    fn is_time_dependent(&self) -> bool {
        self.velocity.is_time_dependent()
    }

    fn source_at(&self, t: f64) -> Result<Option<GridField>> {
        match &self.source {
            None => Ok(None),
            Some(SourceTerm(f)) => GridField::sample(OperatorSource::grid(self), |x1, x2| f(x1, x2, t)).map(Some),
        }
    }
}
