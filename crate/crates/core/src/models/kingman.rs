use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::measures::MeasureWithAtom;

use super::{CondensationCriterion, CondensationModel, OperatorFields, TheoryConstants};

/// Kingman's house-of-cards model in continuous time, condensation point moved to 0:
///
/// `∂t p = ((1-beta)(1-x)/w[p] - 1) p + beta u(x)`, `w[p] = ∫(1-x) p(dx)`,
///
/// with mutant density `u(x) = (alpha_u + 1) x^alpha_u` on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KingmanParams {
    /// Mutation frequency, in `(0, 1)`.
    pub beta_mut: f64,
    pub alpha_u: f64,
}

impl KingmanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_mut > 0.0 && self.beta_mut < 1.0) {
            return Err(Error::Config(format!(
                "kingman.beta_mut must lie in (0, 1) (got {})",
                self.beta_mut
            )));
        }
        if !(self.alpha_u > 0.0) || !self.alpha_u.is_finite() {
            return Err(Error::Config(format!(
                "kingman.alpha_u must be > 0 for the condensation criterion to converge (got {})",
                self.alpha_u
            )));
        }
        Ok(())
    }

    /// `u0(x) = u(x) / x^alpha_u`, constant for the built-in mutant law.
    pub fn u0(&self) -> f64 {
        self.alpha_u + 1.0
    }

    pub fn u(&self, x: f64) -> f64 {
        self.u0() * x.powf(self.alpha_u)
    }
}

#[derive(Debug, Clone)]
pub struct Kingman {
    grid: Grid,
    params: KingmanParams,
    one_minus_x: Vec<f64>,
}

impl Kingman {
    pub fn new(grid: Grid, params: KingmanParams) -> Result<Self> {
        params.validate()?;
        if (grid.x_max() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "kingman model lives on (0, 1): grid.x_max must be 1 (got {})",
                grid.x_max()
            )));
        }
        let one_minus_x = grid.nodes().iter().map(|x| 1.0 - x).collect();
        Ok(Self {
            grid,
            params,
            one_minus_x,
        })
    }

    pub fn params(&self) -> &KingmanParams {
        &self.params
    }

    /// Mean (shifted) fitness `w[p] = ∫ (1-x) p(dx)`.
    pub fn mean_fitness(&self, p: &MeasureWithAtom) -> Result<f64> {
        self.grid.check_len(&p.bulk, "density")?;
        let vals: Vec<f64> = self.one_minus_x.iter().zip(&p.bulk).map(|(a, b)| a * b).collect();
        let x0 = self.grid.x_min();
        let shifted = HeadModel {
            exponent: p.head.exponent + 1.0,
            coefficient: p.head.coefficient,
        };
        let head_correction = -shifted.integral_to(x0);
        Ok(p.atom_mass + self.grid.integrate(&vals, &p.head)? + head_correction)
    }

    /// Bulk of the stationary limit, `q(x) = beta u(x) / x`.
    fn stationary_bulk(&self) -> (Vec<f64>, HeadModel) {
        let KingmanParams { beta_mut, alpha_u } = self.params;
        let c = beta_mut * self.params.u0();
        let bulk = self.grid.nodes().iter().map(|&x| c * x.powf(alpha_u - 1.0)).collect();
        (
            bulk,
            HeadModel {
                exponent: alpha_u - 1.0,
                coefficient: c,
            },
        )
    }

    pub fn condensation_criterion(&self) -> Result<CondensationCriterion> {
        let (bulk, head) = self.stationary_bulk();
        let value = self.grid.integrate(&bulk, &head)?;
        Ok(CondensationCriterion {
            condenses: value < 1.0,
            critical_mass: 1.0,
            value,
        })
    }

    pub fn stationary_solution(&self) -> Result<MeasureWithAtom> {
        let (bulk, head) = self.stationary_bulk();
        let criterion = self.grid.integrate(&bulk, &head)?;
        let rho = super::supercritical(1.0, criterion)?;
        MeasureWithAtom::new(rho, bulk, head)
    }

    pub fn theory_constants(&self, alpha0: f64) -> Result<TheoryConstants> {
        let p_inf = self.stationary_solution()?;
        let fields = self.eval_operators(&p_inf)?;
        let c2 = 1.0 / (self.params.beta_mut * self.params.u0());
        TheoryConstants::new(self.params.alpha_u, fields.c0, c2, p_inf.atom_mass, alpha0)
    }
}

impl CondensationModel for Kingman {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.params.alpha_u
    }

    fn eval_operators(&self, p: &MeasureWithAtom) -> Result<OperatorFields> {
        let w = self.mean_fitness(p)?;
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Numeric(format!("mean fitness w[p] = {w} is not positive")));
        }
        let s = (1.0 - self.params.beta_mut) / w;
        let b = self.one_minus_x.iter().map(|a| s * a - 1.0).collect();
        let c_val = self.params.beta_mut * self.params.u0();
        Ok(OperatorFields {
            b0: s - 1.0,
            b,
            c0: c_val,
            c: vec![c_val; self.grid.len()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{total_mass, InitialCondition};
    use crate::models::{mass_rate, stationarity_residual};

    fn model(beta_mut: f64) -> Kingman {
        let grid = Grid::new(1e-6, 1.0, 1024).unwrap();
        Kingman::new(grid, KingmanParams { beta_mut, alpha_u: 1.0 }).unwrap()
    }

    #[test]
    fn stationary_limit_and_fields() {
        let m = model(0.3);
        let p = m.stationary_solution().unwrap();
        assert!((p.atom_mass - 0.4).abs() < 1e-12);
        assert!(p.bulk.iter().all(|q| (q - 0.6).abs() < 1e-15));
        assert!((m.mean_fitness(&p).unwrap() - 0.7).abs() < 1e-8);
        let f = m.eval_operators(&p).unwrap();
        for (b, x) in f.b.iter().zip(m.grid().nodes()) {
            assert!((b + x).abs() < 1e-8);
        }
        assert!(f.b0.abs() < 1e-8);
        assert!(f.c.iter().all(|c| (c - 0.6).abs() < 1e-15));
        let (sup, b0) = stationarity_residual(&m, &p).unwrap();
        assert!(sup < 1e-12 && b0 < 1e-12);
    }

    #[test]
    fn criterion_and_constants() {
        let c = model(0.3).condensation_criterion().unwrap();
        assert!(c.condenses);
        assert!((c.value - 0.6).abs() < 1e-10);
        let c = model(0.6).condensation_criterion().unwrap();
        assert!(!c.condenses);
        assert!((c.value - 1.2).abs() < 1e-10);
        assert!(matches!(
            model(0.6).stationary_solution(),
            Err(Error::NoCondensation { .. })
        ));

        let tc = model(0.3).theory_constants(2.0).unwrap();
        assert!((tc.c1 - 0.6).abs() < 1e-12);
        assert!((tc.c2 - 1.0 / 0.6).abs() < 1e-12);
        assert!((tc.gamma - 1.0).abs() < 1e-12);
        assert_eq!(tc.beta_shape, 1.0);
        assert_eq!(model(0.3).theory_constants(0.5).unwrap().beta_shape, 0.5);
    }

    #[test]
    fn invalid_parameters() {
        let grid = Grid::new(1e-6, 1.0, 64).unwrap();
        let bad = |b, a| Kingman::new(grid.clone(), KingmanParams { beta_mut: b, alpha_u: a });
        assert!(matches!(bad(1.5, 1.0), Err(Error::Config(_))));
        assert!(matches!(bad(0.3, 0.0), Err(Error::Config(_))));
        let g2 = Grid::new(1e-6, 2.0, 64).unwrap();
        assert!(Kingman::new(g2, KingmanParams { beta_mut: 0.3, alpha_u: 1.0 }).is_err());
    }

    #[test]
    fn mass_law_rate() {
        let m = model(0.3);
        for (alpha0, mass) in [(2.0, 1.0), (0.5, 1.3), (1.0, 0.7)] {
            let ic = InitialCondition::new(m.grid(), alpha0, mass, 0.0).unwrap();
            let p = ic.density(m.grid());
            let big_m = total_mass(m.grid(), &p).unwrap();
            let rate = mass_rate(&m, &p).unwrap();
            assert!((rate - (1.0 - big_m)).abs() < 1e-8, "{rate} vs {}", 1.0 - big_m);
        }
    }
}
