//! Finite-difference solver for the two-dimensional non-stationary
//! convection-diffusion(-reaction) equation
//!
//! ```text
//! du/dt + div(v u) - div(k grad u) = f   in (0, l1) x (0, l2),
//! k du/dn = 0                              on the boundary,
//! ```
//!
//! on a uniform cell-centered grid with face-staggered velocity, together with
//! time schemes that stay stable for any time step when the velocity field is
//! compressible.

pub mod app;
pub mod config;
pub mod error;
pub mod fields;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod problem;
pub mod schemes;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{
    discrete_divergence_half, split_reaction, stability_constant, DiffusionField, ReactionField,
    VelocityField,
};
pub use grid::{inner_product, norm, Grid2D, GridField};
pub use operators::{Combination, FaceMean, OperatorSet, ReactionPart};
pub use problem::{Modulation, OperatorSource, Problem, VelocityPreset, VelocitySpec};
pub use schemes::{
    integrate, integrate_with, step_exp_transform, step_explicit_implicit, step_standard, DeltaPolicy,
    ImplicitConvection, RunReport, SchemeConfig, SchemeKind, TimeGrid,
};
