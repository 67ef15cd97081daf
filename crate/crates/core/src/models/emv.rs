use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::measures::MeasureWithAtom;

use super::{CondensationCriterion, CondensationModel, KernelTables, OperatorFields, TheoryConstants};

/// Symmetric collision kernel `sigma(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sigma {
    Constant { s0: f64 },
    /// `s0 * exp(-a (x + y))`.
    ExpDecay { s0: f64, a: f64 },
}

impl Sigma {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Sigma::Constant { s0 } => s0,
            Sigma::ExpDecay { s0, a } => s0 * (-a * (x + y)).exp(),
        }
    }

    /// Upper bound of `sigma` on the positive quadrant.
    pub fn bound(&self) -> f64 {
        match *self {
            Sigma::Constant { s0 } | Sigma::ExpDecay { s0, .. } => s0,
        }
    }

    /// `sup |d/dx sigma(x, y)|` over the positive quadrant.
    pub fn x_derivative_bound(&self) -> f64 {
        match *self {
            Sigma::Constant { .. } => 0.0,
            Sigma::ExpDecay { s0, a } => s0 * a,
        }
    }

    fn validate(&self) -> Result<()> {
        let (s0, a) = match *self {
            Sigma::Constant { s0 } => (s0, 0.0),
            Sigma::ExpDecay { s0, a } => (s0, a),
        };
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::Config(format!("emv.sigma.s0 must be > 0 (got {s0})")));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Config(format!("emv.sigma.a must be >= 0 (got {a})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmvParams {
    /// Exponential weight `eta` in `[0, 1)`.
    pub eta: f64,
    pub sigma: Sigma,
}

impl EmvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("emv.eta must lie in [0, 1) (got {})", self.eta)));
        }
        self.sigma.validate()
    }
}

/// Bosons coupled to a fermion bath, in the transformed variable `p = e^{eta x} F`:
///
/// `B[p](x) = e^{eta x} ∫ sigma(x,y) (e^{-x} - e^{-y}) p(dy) - e^{eta x} ∫ sigma(x,y) y² e^{(eta-1)y} dy`,
/// `C[p](x) = e^{(2 eta - 1) x} ∫ sigma(x,y) p(dy)`, `alpha = 2`.
///
/// The conserved quantity is `∫ e^{-eta x} p(dx)`; the `total_mass` arguments
/// below refer to it (for `eta = 0` it is the plain mass).
#[derive(Debug, Clone)]
pub struct Emv {
    grid: Grid,
    params: EmvParams,
    tables: KernelTables,
}

impl Emv {
    pub fn new(grid: Grid, params: EmvParams) -> Result<Self> {
        params.validate()?;
        let EmvParams { eta, sigma } = params;
        let nodes = grid.nodes();
        let weights = grid.weights();
        // The head segment of the affine part is O(x_1^3) and left out, so that
        // the stationary balance holds node by node.
        let rb_at = |x: f64| -> f64 {
            let s: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(&y, w)| w * sigma.eval(x, y) * y * y * ((eta - 1.0) * y).exp())
                .sum();
            -(eta * x).exp() * s
        };
        let mut rb = Vec::with_capacity(grid.len() + 1);
        rb.push(rb_at(0.0));
        rb.extend(nodes.iter().map(|&x| rb_at(x)));
        let rc = vec![0.0; grid.len() + 1];
        let tables = KernelTables::build(
            &grid,
            |x, y| sigma.eval(x, y) * (eta * x).exp() * ((-x).exp() - (-y).exp()),
            |x, y| ((2.0 * eta - 1.0) * x).exp() * sigma.eval(x, y),
            rb,
            rc,
        )?;
        Ok(Self { grid, params, tables })
    }

    pub fn params(&self) -> &EmvParams {
        &self.params
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    /// `∫ e^{-eta x} p(dx)`, conserved by the dynamics.
    pub fn conserved_mass(&self, p: &MeasureWithAtom) -> Result<f64> {
        self.grid.check_len(&p.bulk, "density")?;
        let eta = self.params.eta;
        let vals: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(&p.bulk)
            .map(|(&x, v)| (-eta * x).exp() * v)
            .collect();
        Ok(p.atom_mass + self.grid.integrate(&vals, &p.head)?)
    }

    /// `q(x) = x² e^{eta x} / (e^x - 1)`.
    fn stationary_bulk(&self) -> (Vec<f64>, HeadModel) {
        let eta = self.params.eta;
        let bulk = self
            .grid
            .nodes()
            .iter()
            .map(|&x| x * x * (eta * x).exp() / x.exp_m1())
            .collect();
        (
            bulk,
            HeadModel {
                exponent: 1.0,
                coefficient: 1.0,
            },
        )
    }

    /// Critical mass `∫ x² / (e^x - 1) dx` evaluated on the model grid.
    pub fn critical_mass(&self) -> Result<f64> {
        let (bulk, head) = self.stationary_bulk();
        let bulk = MeasureWithAtom::new(0.0, bulk, head)?;
        self.conserved_mass(&bulk)
    }

    pub fn condensation_criterion(&self, total_mass: f64) -> Result<CondensationCriterion> {
        let critical_mass = self.critical_mass()?;
        Ok(CondensationCriterion {
            condenses: total_mass > critical_mass,
            critical_mass,
            value: total_mass,
        })
    }

    pub fn stationary_solution(&self, total_mass: f64) -> Result<MeasureWithAtom> {
        let rho = super::supercritical(total_mass, self.critical_mass()?)?;
        let (bulk, head) = self.stationary_bulk();
        MeasureWithAtom::new(rho, bulk, head)
    }

    pub fn theory_constants(&self, total_mass: f64, alpha0: f64) -> Result<TheoryConstants> {
        let p_inf = self.stationary_solution(total_mass)?;
        let fields = self.eval_operators(&p_inf)?;
        TheoryConstants::new(2.0, fields.c0, 1.0, p_inf.atom_mass, alpha0)
    }
}

impl CondensationModel for Emv {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        2.0
    }

    fn eval_operators(&self, p: &MeasureWithAtom) -> Result<OperatorFields> {
        self.tables.apply(&self.grid, p)
    }
}
