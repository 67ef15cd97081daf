//! Fixtures shared by the benchmarks.

use condensate_core::measures::InitialCondition;
use condensate_core::{
    Bsp, BspParams, ChatKernel, Emv, EmvParams, Grid, Kingman, KingmanParams, MeasureWithAtom, Sigma,
};

pub fn kingman(n: usize) -> Kingman {
    let grid = Grid::new(1e-6, 1.0, n).expect("valid grid");
    Kingman::new(grid, KingmanParams { beta_mut: 0.3, alpha_u: 1.0 }).expect("valid parameters")
}

pub fn emv(n: usize) -> Emv {
    let grid = Grid::new(1e-6, 50.0, n).expect("valid grid");
    Emv::new(grid, EmvParams { eta: 0.0, sigma: Sigma::Constant { s0: 1.0 } }).expect("valid parameters")
}

pub fn bsp(n: usize) -> Bsp {
    let grid = Grid::new(1e-6, 50.0, n).expect("valid grid");
    let chat = ChatKernel { c0: 1.0, a: 1.0, kms_beta: None };
    Bsp::new(grid, BspParams::box_3d(1.0, chat)).expect("valid parameters")
}

/// `p_0(x) = A x^alpha0 e^{-x}` carrying the given mass.
pub fn initial(grid: &Grid, alpha0: f64, mass: f64) -> MeasureWithAtom {
    InitialCondition::new(grid, alpha0, mass, 1.0).expect("valid initial condition").density(grid)
}
