//! Measures of the form `rho * delta_0 + p(x) dx` sampled on a [`Grid`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};

/// Number of leading nodes used when re-fitting the head model of a density.
pub const HEAD_FIT_NODES: usize = 4;

/// Atom at the origin plus a bulk density on the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureWithAtom {
    pub atom_mass: f64,
    pub bulk: Vec<f64>,
    pub head: HeadModel,
}

impl MeasureWithAtom {
    pub fn new(atom_mass: f64, bulk: Vec<f64>, head: HeadModel) -> Result<Self> {
        if !(atom_mass >= 0.0) || !atom_mass.is_finite() {
            return Err(Error::Numeric(format!("atom mass must be finite and >= 0 (got {atom_mass})")));
        }
        if let Some(v) = bulk.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite bulk value {v}")));
        }
        Ok(Self {
            atom_mass,
            bulk,
            head,
        })
    }

    /// Measure whose head model is fitted from the leading samples.
    pub fn from_bulk(grid: &Grid, atom_mass: f64, bulk: Vec<f64>) -> Result<Self> {
        grid.check_len(&bulk, "bulk density")?;
        let head = grid.head_or_flat(&bulk, HEAD_FIT_NODES);
        Self::new(atom_mass, bulk, head)
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            atom_mass: 0.0,
            bulk: vec![0.0; grid.len()],
            head: HeadModel::ZERO,
        }
    }

    /// Mass carried by `[0, x_1]` under the head model.
    pub fn head_mass(&self, grid: &Grid) -> f64 {
        self.head.integral_to(grid.x_min())
    }

    pub fn min_bulk(&self) -> f64 {
        self.bulk.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn total_mass(grid: &Grid, m: &MeasureWithAtom) -> Result<f64> {
    Ok(m.atom_mass + grid.integrate(&m.bulk, &m.head)?)
}

/// `rho + ∫_0^eps p(x) dx`. Equals [`total_mass`] at `eps = x_max`.
pub fn mass_below(grid: &Grid, m: &MeasureWithAtom, eps: f64) -> Result<f64> {
    if eps < 0.0 {
        return Err(Error::Range {
            what: "eps",
            value: eps,
            lo: 0.0,
            hi: grid.x_max(),
        });
    }
    Ok(m.atom_mass + grid.integrate_below(&m.bulk, &m.head, eps)?)
}

/// `∫_delta^{x_max} |a - b| dx` over the bulk densities.
pub fn l1_distance_away_from_zero(
    grid: &Grid,
    a: &MeasureWithAtom,
    b: &MeasureWithAtom,
    delta: f64,
) -> Result<f64> {
    grid.check_len(&a.bulk, "first measure")?;
    grid.check_len(&b.bulk, "second measure")?;
    let diff: Vec<f64> = a.bulk.iter().zip(&b.bulk).map(|(x, y)| (x - y).abs()).collect();
    let full = grid.integrate(&diff, &HeadModel::ZERO)?;
    let below = grid.integrate_below(&diff, &HeadModel::ZERO, delta.min(grid.x_max()))?;
    Ok((full - below).max(0.0))
}

/// Initial density `p_0(x) = x^alpha0 * eta(x)` with `eta(x) = A e^{-decay x}`.
///
/// `A` is fixed by quadrature so that the sampled density carries exactly the
/// requested mass on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub alpha0: f64,
    pub decay: f64,
    pub mass: f64,
    /// `eta(0) = A`.
    pub eta0: f64,
    pub eta: Vec<f64>,
}

impl InitialCondition {
    pub fn new(grid: &Grid, alpha0: f64, mass: f64, decay: f64) -> Result<Self> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(Error::Config(format!("alpha0 must be > 0 (got {alpha0})")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Config(format!("initial mass must be > 0 (got {mass})")));
        }
        if !(decay >= 0.0) || !decay.is_finite() {
            return Err(Error::Config(format!("initial decay rate must be >= 0 (got {decay})")));
        }
        let shape: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| x.powf(alpha0) * (-decay * x).exp())
            .collect();
        let unit = grid.integrate(&shape, &HeadModel::new(alpha0, 1.0)?)?;
        let eta0 = mass / unit;
        let eta = grid.nodes().iter().map(|&x| eta0 * (-decay * x).exp()).collect();
        Ok(Self {
            alpha0,
            decay,
            mass,
            eta0,
            eta,
        })
    }

    pub fn density(&self, grid: &Grid) -> MeasureWithAtom {
        let bulk = grid
            .nodes()
            .iter()
            .zip(&self.eta)
            .map(|(&x, e)| x.powf(self.alpha0) * e)
            .collect();
        MeasureWithAtom {
            atom_mass: 0.0,
            bulk,
            head: HeadModel {
                exponent: self.alpha0,
                coefficient: self.eta0,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(1e-6, 50.0, 1024).unwrap()
    }

    #[test]
    fn total_mass_is_additive() {
        let g = grid();
        let bulk: Vec<f64> = g.nodes().iter().map(|&x| x * x / x.exp_m1()).collect();
        let m = MeasureWithAtom::from_bulk(&g, 0.4, bulk.clone()).unwrap();
        let body = g.integrate(&bulk, &m.head).unwrap();
        assert_eq!(total_mass(&g, &m).unwrap(), 0.4 + body);
        assert_eq!(total_mass(&g, &MeasureWithAtom::zero(&g)).unwrap(), 0.0);
        let atom = MeasureWithAtom::new(1.0, vec![0.0; g.len()], HeadModel::ZERO).unwrap();
        assert_eq!(total_mass(&g, &atom).unwrap(), 1.0);
    }

    #[test]
    fn mass_below_edges() {
        let g = grid();
        let bulk: Vec<f64> = g.nodes().iter().map(|&x| (-x).exp() * x).collect();
        let m = MeasureWithAtom::from_bulk(&g, 0.2, bulk).unwrap();
        assert_eq!(mass_below(&g, &m, 50.0).unwrap(), total_mass(&g, &m).unwrap());
        assert!(mass_below(&g, &m, 60.0).is_err());

        let g1 = Grid::new(1e-6, 1.0, 1024).unwrap();
        let lin: Vec<f64> = g1.nodes().iter().map(|&x| 2.0 * x).collect();
        let m = MeasureWithAtom::new(0.0, lin, HeadModel::new(1.0, 2.0).unwrap()).unwrap();
        assert!((mass_below(&g1, &m, 0.5).unwrap() - 0.25).abs() < 1e-4);
        let eps = 4e-7;
        assert!((mass_below(&g1, &m, eps).unwrap() - eps * eps).abs() < 1e-12);
    }

    #[test]
    fn l1_distance_cases() {
        let g = grid();
        let a: Vec<f64> = g.nodes().iter().map(|&x| (-x).exp() + 0.5 * x).collect();
        let b: Vec<f64> = g.nodes().iter().map(|&x| 0.5 * x).collect();
        let ma = MeasureWithAtom::from_bulk(&g, 0.0, a).unwrap();
        let mb = MeasureWithAtom::from_bulk(&g, 0.0, b).unwrap();
        assert_eq!(l1_distance_away_from_zero(&g, &ma, &ma, 0.1).unwrap(), 0.0);
        let d = l1_distance_away_from_zero(&g, &ma, &mb, 1.0).unwrap();
        assert!((d - (-1f64).exp()).abs() < 1e-6, "{d}");
        assert_eq!(l1_distance_away_from_zero(&g, &ma, &mb, 50.0).unwrap(), 0.0);
        let short = MeasureWithAtom::new(0.0, vec![0.0; 3], HeadModel::ZERO).unwrap();
        assert!(matches!(
            l1_distance_away_from_zero(&g, &ma, &short, 1.0),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn initial_condition_carries_requested_mass() {
        let g = Grid::new(1e-6, 1.0, 1024).unwrap();
        let ic = InitialCondition::new(&g, 2.0, 1.3, 0.0).unwrap();
        assert!((ic.eta0 - 3.9).abs() < 1e-5, "{}", ic.eta0);
        let p0 = ic.density(&g);
        assert!((total_mass(&g, &p0).unwrap() - 1.3).abs() < 1e-14);
        assert!(InitialCondition::new(&g, 0.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mass_below_is_monotone(a in 0.1f64..5.0, k in 0.0f64..3.0, e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0) {
            let g = Grid::new(1e-6, 1.0, 128).unwrap();
            let bulk: Vec<f64> = g.nodes().iter().map(|&x| x.powf(k) * (-a * x).exp()).collect();
            let m = MeasureWithAtom::from_bulk(&g, 0.3, bulk).unwrap();
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(mass_below(&g, &m, lo).unwrap() <= mass_below(&g, &m, hi).unwrap());
        }

        #[test]
        fn l1_triangle_inequality(s1 in 0.1f64..3.0, s2 in 0.1f64..3.0, s3 in 0.1f64..3.0, delta in 1e-4f64..1.0) {
            let g = Grid::new(1e-6, 10.0, 64).unwrap();
            let mk = |s: f64| MeasureWithAtom::from_bulk(&g, 0.0, g.nodes().iter().map(|&x| (x * s).sin()).collect()).unwrap();
            let (a, b, c) = (mk(s1), mk(s2), mk(s3));
            let ab = l1_distance_away_from_zero(&g, &a, &b, delta).unwrap();
            let bc = l1_distance_away_from_zero(&g, &b, &c, delta).unwrap();
            let ac = l1_distance_away_from_zero(&g, &a, &c, delta).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
