//! Effective condensation models `∂t p = B[p] p + x^alpha C[p]`.
//!
//! Three concrete models are provided: Kingman's selection-mutation model
//! ([`Kingman`]), the boson/fermion-bath model ([`Emv`]) and the Bose gas in a
//! heat bath ([`Bsp`]). [`Model`] wraps them for configuration-driven use.

mod bsp;
mod emv;
mod kernel;
mod kingman;

pub use bsp::{Bsp, BspParams, ChatKernel};
pub use emv::{Emv, EmvParams, Sigma};
pub use kernel::KernelTables;
pub use kingman::{Kingman, KingmanParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measures::MeasureWithAtom;

/// Sampled `b = B[p]` and `c = C[p]` on the grid nodes plus their values at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFields {
    pub b0: f64,
    pub b: Vec<f64>,
    pub c0: f64,
    pub c: Vec<f64>,
}

impl OperatorFields {
    pub fn check_finite(&self) -> Result<()> {
        let bad = !self.b0.is_finite()
            || !self.c0.is_finite()
            || self.b.iter().chain(&self.c).any(|v| !v.is_finite());
        if bad {
            return Err(Error::Numeric("operator fields contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Constants governing the scaling limit `(1/t) p_t(x/t) -> C e^{-gamma x} x^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub alpha: f64,
    /// `C[p_inf](0)`.
    pub c1: f64,
    /// `lim_{x->0} x^{alpha-1} / q(x)`.
    pub c2: f64,
    pub gamma: f64,
    pub rho: f64,
    pub alpha0: f64,
    /// `min(alpha, alpha0)`.
    pub beta_shape: f64,
}

impl TheoryConstants {
    pub fn new(alpha: f64, c1: f64, c2: f64, rho: f64, alpha0: f64) -> Result<Self> {
        if !(c1 > 0.0) || !(c2 > 0.0) {
            return Err(Error::Numeric(format!(
                "theory constants require c1 > 0 and c2 > 0 (c1 = {c1}, c2 = {c2})"
            )));
        }
        Ok(Self {
            alpha,
            c1,
            c2,
            gamma: c1 * c2,
            rho,
            alpha0,
            beta_shape: alpha.min(alpha0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensationCriterion {
    pub condenses: bool,
    /// Threshold on the total mass (Kingman: threshold 1 on the dimensionless criterion).
    pub critical_mass: f64,
    /// Quantity compared against the threshold.
    pub value: f64,
}

/// Right-hand side of the evolution equation, as seen by the integrators.
pub trait CondensationModel: Send + Sync {
    fn grid(&self) -> &Grid;

    /// Exponent `alpha` of the inhomogeneous term `x^alpha C[p]`.
    fn alpha(&self) -> f64;

    fn eval_operators(&self, p: &MeasureWithAtom) -> Result<OperatorFields>;
}

/// Any of the built-in models.
#[derive(Debug, Clone)]
pub enum Model {
    Kingman(Kingman),
    Emv(Emv),
    Bsp(Bsp),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Kingman(_) => "kingman",
            Model::Emv(_) => "emv",
            Model::Bsp(_) => "bsp",
        }
    }

    /// Stationary measure `rho delta_0 + q dx` with the given total mass.
    ///
    /// The Kingman limit always has unit mass, so `total_mass` is ignored there.
    pub fn stationary_solution(&self, total_mass: f64) -> Result<MeasureWithAtom> {
        match self {
            Model::Kingman(m) => m.stationary_solution(),
            Model::Emv(m) => m.stationary_solution(total_mass),
            Model::Bsp(m) => m.stationary_solution(total_mass),
        }
    }

    pub fn condensation_criterion(&self, total_mass: f64) -> Result<CondensationCriterion> {
        match self {
            Model::Kingman(m) => m.condensation_criterion(),
            Model::Emv(m) => m.condensation_criterion(total_mass),
            Model::Bsp(m) => m.condensation_criterion(total_mass),
        }
    }

    pub fn theory_constants(&self, total_mass: f64, alpha0: f64) -> Result<TheoryConstants> {
        match self {
            Model::Kingman(m) => m.theory_constants(alpha0),
            Model::Emv(m) => m.theory_constants(total_mass, alpha0),
            Model::Bsp(m) => m.theory_constants(total_mass, alpha0),
        }
    }

    pub fn kernel_tables(&self) -> Option<&KernelTables> {
        match self {
            Model::Kingman(_) => None,
            Model::Emv(m) => Some(m.tables()),
            Model::Bsp(m) => Some(m.tables()),
        }
    }
}

impl CondensationModel for Model {
    fn grid(&self) -> &Grid {
        match self {
            Model::Kingman(m) => m.grid(),
            Model::Emv(m) => m.grid(),
            Model::Bsp(m) => m.grid(),
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            Model::Kingman(m) => m.alpha(),
            Model::Emv(m) => m.alpha(),
            Model::Bsp(m) => m.alpha(),
        }
    }

    fn eval_operators(&self, p: &MeasureWithAtom) -> Result<OperatorFields> {
        match self {
            Model::Kingman(m) => m.eval_operators(p),
            Model::Emv(m) => m.eval_operators(p),
            Model::Bsp(m) => m.eval_operators(p),
        }
    }
}

/// Pointwise stationarity residual `B[p] q + x^alpha C[p]` and `B[p](0)`.
pub fn stationarity_residual<M: CondensationModel + ?Sized>(
    model: &M,
    p_inf: &MeasureWithAtom,
) -> Result<(f64, f64)> {
    let fields = model.eval_operators(p_inf)?;
    let alpha = model.alpha();
    let sup = model
        .grid()
        .nodes()
        .iter()
        .zip(&p_inf.bulk)
        .zip(fields.b.iter().zip(&fields.c))
        .map(|((&x, q), (b, c))| (b * q + x.powf(alpha) * c).abs())
        .fold(0.0, f64::max);
    Ok((sup, fields.b0.abs()))
}

/// `∫ (B[p] p + x^alpha C[p]) dx`, the rate of change of the bulk mass.
pub fn mass_rate<M: CondensationModel + ?Sized>(model: &M, p: &MeasureWithAtom) -> Result<f64> {
    let grid = model.grid();
    let fields = model.eval_operators(p)?;
    let alpha = model.alpha();
    let rhs: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&p.bulk)
        .zip(fields.b.iter().zip(&fields.c))
        .map(|((&x, v), (b, c))| b * v + x.powf(alpha) * c)
        .collect();
    let head = grid.head_or_flat(&rhs, crate::measures::HEAD_FIT_NODES);
    grid.integrate(&rhs, &head)
}

fn supercritical(total_mass: f64, critical_mass: f64) -> Result<f64> {
    let rho = total_mass - critical_mass;
    if !(rho > 0.0) {
        return Err(Error::NoCondensation {
            total_mass,
            critical_mass,
        });
    }
    Ok(rho)
}
