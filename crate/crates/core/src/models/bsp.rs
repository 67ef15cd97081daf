use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::measures::MeasureWithAtom;

use super::{CondensationCriterion, CondensationModel, KernelTables, OperatorFields, TheoryConstants};

/// Bath correlation `C(z) = c0 * exp(-a |z| - kms_beta * z / 2)`.
///
/// With `kms_beta` equal to the inverse temperature this satisfies the KMS
/// relation `C(-z) = C(z) e^{beta z}`; `a > kms_beta / 2` keeps it bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatKernel {
    pub c0: f64,
    pub a: f64,
    /// Defaults to the bath inverse temperature when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kms_beta: Option<f64>,
}

impl ChatKernel {
    pub fn eval(&self, z: f64, beta_temp: f64) -> f64 {
        let kb = self.kms_beta.unwrap_or(beta_temp);
        self.c0 * (-self.a * z.abs() - 0.5 * kb * z).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BspParams {
    /// Inverse temperature of the bath.
    pub beta_temp: f64,
    /// Exponent of the density of states `F(x) = f0 x^alpha_f`.
    pub alpha_f: f64,
    pub f0: f64,
    pub chat: ChatKernel,
}

impl BspParams {
    /// Three-dimensional box: `F(x) = x^{1/2} / (sqrt(2) pi^2)`.
    pub fn box_3d(beta_temp: f64, chat: ChatKernel) -> Self {
        Self {
            beta_temp,
            alpha_f: 0.5,
            f0: 1.0 / (std::f64::consts::SQRT_2 * std::f64::consts::PI.powi(2)),
            chat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("bsp.{name} must be > 0 (got {v})")))
            }
        };
        pos("beta_temp", self.beta_temp)?;
        pos("alpha_f", self.alpha_f)?;
        pos("f0", self.f0)?;
        pos("chat.c0", self.chat.c0)?;
        let kb = self.chat.kms_beta.unwrap_or(self.beta_temp);
        if !kb.is_finite() || !(self.chat.a > 0.5 * kb.abs()) {
            return Err(Error::Config(format!(
                "bsp.chat.a must exceed |kms_beta|/2 = {} for a bounded kernel (got {})",
                0.5 * kb.abs(),
                self.chat.a
            )));
        }
        Ok(())
    }

    pub fn chat(&self, z: f64) -> f64 {
        self.chat.eval(z, self.beta_temp)
    }

    /// `A(z) = C(z) (e^{beta z} - 1)`.
    pub fn a_kernel(&self, z: f64) -> f64 {
        self.chat(z) * (self.beta_temp * z).exp_m1()
    }

    pub fn density_of_states(&self, x: f64) -> f64 {
        self.f0 * x.powf(self.alpha_f)
    }

    /// Largest relative deviation from `C(-z) = C(z) e^{beta z}` over `samples`.
    pub fn kms_violation(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&z| {
                let lhs = self.chat(-z);
                let rhs = self.chat(z) * (self.beta_temp * z).exp();
                (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Bose gas in contact with a heat bath:
///
/// `B[p](x) = ∫ A(y-x) p(dy) - ∫ C(y-x) F(y) dy`, `C[p](x) = f0 ∫ C(x-y) p(dy)`,
/// `alpha = alpha_f`.
#[derive(Debug, Clone)]
pub struct Bsp {
    grid: Grid,
    params: BspParams,
    tables: KernelTables,
}

impl Bsp {
    pub fn new(grid: Grid, params: BspParams) -> Result<Self> {
        params.validate()?;
        let p = params;
        let nodes = grid.nodes();
        let weights = grid.weights();
        // The head segment of the affine part is O(x_1^{alpha_f+1}) and left out,
        // so that detailed balance holds node by node.
        let rb_at = |x: f64| -> f64 {
            -nodes
                .iter()
                .zip(weights)
                .map(|(&y, w)| w * p.chat(y - x) * p.density_of_states(y))
                .sum::<f64>()
        };
        let mut rb = Vec::with_capacity(grid.len() + 1);
        rb.push(rb_at(0.0));
        rb.extend(nodes.iter().map(|&x| rb_at(x)));
        let rc = vec![0.0; grid.len() + 1];
        let tables = KernelTables::build(
            &grid,
            |x, y| p.a_kernel(y - x),
            |x, y| p.f0 * p.chat(x - y),
            rb,
            rc,
        )?;
        Ok(Self { grid, params, tables })
    }

    pub fn params(&self) -> &BspParams {
        &self.params
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    /// `q(x) = F(x) / (e^{beta x} - 1)`.
    fn stationary_bulk(&self) -> (Vec<f64>, HeadModel) {
        let p = &self.params;
        let bulk = self
            .grid
            .nodes()
            .iter()
            .map(|&x| p.density_of_states(x) / (p.beta_temp * x).exp_m1())
            .collect();
        (
            bulk,
            HeadModel {
                exponent: p.alpha_f - 1.0,
                coefficient: p.f0 / p.beta_temp,
            },
        )
    }

    /// Critical mass `∫ F(x) / (e^{beta x} - 1) dx` on the model grid.
    pub fn critical_mass(&self) -> Result<f64> {
        let (bulk, head) = self.stationary_bulk();
        self.grid.integrate(&bulk, &head)
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

    /// `c1 = C[p_inf](0) = f0 ∫ C(-y) p_inf(dy)`, `c2 = beta / f0`.
    pub fn theory_constants(&self, total_mass: f64, alpha0: f64) -> Result<TheoryConstants> {
        let p_inf = self.stationary_solution(total_mass)?;
        let fields = self.eval_operators(&p_inf)?;
        let c2 = self.params.beta_temp / self.params.f0;
        TheoryConstants::new(self.params.alpha_f, fields.c0, c2, p_inf.atom_mass, alpha0)
    }
}

impl CondensationModel for Bsp {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.params.alpha_f
    }

    fn eval_operators(&self, p: &MeasureWithAtom) -> Result<OperatorFields> {
        self.tables.apply(&self.grid, p)
    }
}
