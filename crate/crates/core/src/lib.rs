//! Numerics for effective condensation equations `∂t p = B[p] p + x^alpha C[p]`.
//!
//! The crate provides a log-uniform spatial [`grid`], measures with an atom at
//! the origin ([`measures`]), three concrete [`models`], an exponential
//! midpoint time stepper ([`integrator`]), scaling-limit [`diagnostics`] and
//! independent reference solvers ([`oracle`]). File formats live in [`io`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod measures;
pub mod models;
pub mod oracle;

pub use error::{Error, Result};
pub use grid::{Grid, HeadModel};
pub use integrator::{adaptive_advance, Checkpoint, SimulationState, StepperConfig};
pub use measures::{InitialCondition, MeasureWithAtom};
pub use models::{
    Bsp, BspParams, ChatKernel, CondensationCriterion, CondensationModel, Emv, EmvParams, Kingman,
    KingmanParams, Model, OperatorFields, Sigma, TheoryConstants,
};
