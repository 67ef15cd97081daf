//! Independent reference computations.
//!
//! [`rk4_reference`] integrates the semi-discrete system with the classical
//! fourth-order Runge-Kutta method. [`kingman_semianalytic`] solves the Kingman
//! model through its integrating-factor reduction and never touches the model's
//! operator code or the grid quadrature. [`analytic_integral_suite`] checks the
//! quadrature against closed-form integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::measures::MeasureWithAtom;
use crate::models::{CondensationModel, KingmanParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// `∫ |a - b| dx` over the grid.
    pub l1_deviation: f64,
    pub max_rel_deviation: f64,
    /// `(t, x)` of the largest relative deviation.
    pub location: (f64, f64),
}

/// Deviation of `a` from the reference `b`, both at time `t`.
///
/// Relative deviations are taken against `max(|b|, 1e-10 max|b|)`.
pub fn compare(grid: &Grid, a: &MeasureWithAtom, b: &MeasureWithAtom, t: f64) -> Result<OracleReport> {
    grid.check_len(&a.bulk, "first density")?;
    grid.check_len(&b.bulk, "reference density")?;
    let diff: Vec<f64> = a.bulk.iter().zip(&b.bulk).map(|(x, y)| (x - y).abs()).collect();
    let l1_deviation = grid.integrate(&diff, &HeadModel::ZERO)?;
    let floor = 1e-10 * b.bulk.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (mut worst, mut at) = (0.0, grid.nodes()[0]);
    for ((d, r), &x) in diff.iter().zip(&b.bulk).zip(grid.nodes()) {
        let rel = d / r.abs().max(floor).max(f64::MIN_POSITIVE);
        if rel > worst {
            worst = rel;
            at = x;
        }
    }
    Ok(OracleReport {
        l1_deviation,
        max_rel_deviation: worst,
        location: (t, at),
    })
}

/// Classical RK4 with fixed step (the last step is shortened to land on `t_end`).
pub fn rk4_reference<M: CondensationModel + ?Sized>(
    model: &M,
    p0: &MeasureWithAtom,
    t_end: f64,
    dt: f64,
    blowup_cap: f64,
) -> Result<MeasureWithAtom> {
    let grid = model.grid();
    grid.check_len(&p0.bulk, "initial density")?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Config(format!("rk4 needs dt > 0 and t_end >= 0 (dt = {dt}, t_end = {t_end})")));
    }
    let alpha = model.alpha();
    let xa: Vec<f64> = grid.nodes().iter().map(|x| x.powf(alpha)).collect();
    let rhs = |p: &[f64]| -> Result<Vec<f64>> {
        let m = MeasureWithAtom::from_bulk(grid, 0.0, p.to_vec())?;
        let f = model.eval_operators(&m)?;
        Ok(p.par_iter()
            .zip(f.b.par_iter())
            .zip(f.c.par_iter().zip(xa.par_iter()))
            .map(|((p, b), (c, xa))| b * p + xa * c)
            .collect())
    };
    let axpy = |p: &[f64], k: &[f64], h: f64| -> Vec<f64> { p.iter().zip(k).map(|(a, b)| a + h * b).collect() };

    let mut p = p0.bulk.clone();
    let mut t = 0.0;
    while t < t_end {
        let h = dt.min(t_end - t);
        let k1 = rhs(&p)?;
        let k2 = rhs(&axpy(&p, &k1, 0.5 * h))?;
        let k3 = rhs(&axpy(&p, &k2, 0.5 * h))?;
        let k4 = rhs(&axpy(&p, &k3, h))?;
        for i in 0..p.len() {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if t_end - t <= dt { t_end } else { t + h };
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > blowup_cap) {
            return Err(Error::BlowUp {
                t,
                x: grid.nodes()[i],
                value: v,
            });
        }
    }
    MeasureWithAtom::from_bulk(grid, 0.0, p)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Initial density `A x^alpha0 e^{-decay x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawInitial {
    pub alpha0: f64,
    pub amplitude: f64,
    pub decay: f64,
}

impl PowerLawInitial {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * x.powf(self.alpha0) * (-self.decay * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemianalyticConfig {
    /// Time step of the `Phi` integration.
    pub step: f64,
    pub max_iterations: usize,
    /// Convergence tolerance of the per-step fixed point, relative.
    pub tolerance: f64,
}

impl Default for SemianalyticConfig {
    fn default() -> Self {
        Self {
            step: 1e-2,
            max_iterations: 60,
            tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemianalyticSolution {
    pub t: f64,
    /// Solution sampled on the output grid nodes.
    pub density: MeasureWithAtom,
    /// `∫_0^1 p_t` by the oracle's own quadrature.
    pub total_mass: f64,
    /// Initial mass by the same quadrature.
    pub initial_mass: f64,
    /// `Phi_t = ∫_0^t (1 - beta) / w_s ds`.
    pub phi: f64,
    pub w: f64,
}

/// Composite Gauss-Legendre rule on `[0, 1]` with geometric panels of ratio 1.5
/// down to `1e-14`.
struct PanelRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl PanelRule {
    fn new(points: usize) -> Self {
        let (gx, gw) = gauss_legendre(points);
        let mut edges = vec![1.0];
        while *edges.last().unwrap() > 1e-14 {
            let e = edges.last().unwrap() / 1.5;
            edges.push(e);
        }
        edges.push(0.0);
        edges.reverse();
        let mut x = Vec::new();
        let mut w = Vec::new();
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            let half = 0.5 * (b - a);
            for (z, wz) in gx.iter().zip(&gw) {
                x.push(a + half * (z + 1.0));
                w.push(half * wz);
            }
        }
        Self { x, w }
    }
}

/// Kingman solution through `p_t(x) = e^{(1-x)Phi_t - t} p_0(x) + beta u(x) V_t(x)`,
/// `V_t(x) = ∫_0^t e^{(1-x)(Phi_t - Phi_s) - (t-s)} ds`, with the scalar
/// `Phi' = (1 - beta) / w[p_t]` integrated self-consistently.
///
/// Each step of size `h` represents `Phi` on the step by the cubic Hermite
/// interpolant of `(Phi, Phi')` at both ends, advances `Phi` by the
/// endpoint-corrected trapezoid rule `h/2 (Phi'_n + Phi'_{n+1}) + h²/12 (Phi''_n - Phi''_{n+1})`
/// and updates `V` exactly up to a 4-point Gauss rule in `s`. The unknown end
/// values are found by fixed-point iteration.
pub fn kingman_semianalytic(
    params: &KingmanParams,
    p0: &PowerLawInitial,
    output: &Grid,
    t: f64,
    config: &SemianalyticConfig,
) -> Result<SemianalyticSolution> {
    params.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("oracle time must be finite and >= 0 (got {t})")));
    }
    if !(config.step > 0.0) || config.max_iterations == 0 {
        return Err(Error::Config("oracle step must be > 0 and iterations >= 1".into()));
    }
    if output.x_max() > 1.0 + 1e-12 {
        return Err(Error::Config("kingman oracle output grid must lie in (0, 1]".into()));
    }
    let beta = params.beta_mut;
    let rule = PanelRule::new(16);
    let nq = rule.x.len();
    // Quadrature nodes first, output nodes after.
    let xs: Vec<f64> = rule.x.iter().chain(output.nodes()).copied().collect();
    let p0v: Vec<f64> = xs.iter().map(|&x| p0.eval(x)).collect();
    let uv: Vec<f64> = xs.iter().map(|&x| beta * params.u(x)).collect();
    let (sg, sw) = gauss_legendre(4);

    let quad = |f: &dyn Fn(usize) -> f64| -> f64 { (0..nq).map(|i| rule.w[i] * f(i)).sum() };
    let density = |phi: f64, tt: f64, v: &[f64]| -> Vec<f64> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| ((1.0 - x) * phi - tt).exp() * p0v[i] + uv[i] * v[i])
            .collect()
    };
    // (w, w') for a density p with Phi' = dphi.
    let moments = |p: &[f64], dphi: f64| -> (f64, f64) {
        let w = quad(&|i| (1.0 - xs[i]) * p[i]);
        let dw = quad(&|i| {
            let x = xs[i];
            (1.0 - x) * (((1.0 - x) * dphi - 1.0) * p[i] + uv[i])
        });
        (w, dw)
    };

    let mut phi = 0.0;
    let mut v = vec![0.0; xs.len()];
    let mut p = p0v.clone();
    let (w0, _) = moments(&p, 0.0);
    let mut dphi = (1.0 - beta) / w0;
    let mut ddphi = {
        let (w, dw) = moments(&p, dphi);
        -(1.0 - beta) * dw / (w * w)
    };
    let mut w_now = w0;

    let steps = (t / config.step).ceil() as usize;
    for n in 0..steps {
        let t0 = n as f64 * config.step;
        let t1 = if n + 1 == steps { t } else { t0 + config.step };
        let h = t1 - t0;
        let (mut d1, mut dd1) = (dphi, ddphi);
        let mut converged = false;
        let mut next = (phi, v.clone(), p.clone(), w_now);
        for _ in 0..config.max_iterations {
            let phi1 = phi + 0.5 * h * (dphi + d1) + h * h / 12.0 * (ddphi - dd1);
            let dphi_total = phi1 - phi;
            // Phi(t1) - Phi(t0 + h tau) by the Hermite cubic.
            let hermite_gap = |tau: f64| -> f64 {
                let (t2, t3) = (tau * tau, tau * tau * tau);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + tau;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                phi1 - (h00 * phi + h10 * h * dphi + h01 * phi1 + h11 * h * d1)
            };
            let gaps: Vec<(f64, f64)> = sg
                .iter()
                .map(|z| {
                    let tau = 0.5 * (z + 1.0);
                    (hermite_gap(tau), (1.0 - tau) * h)
                })
                .collect();
            let v1: Vec<f64> = xs
                .par_iter()
                .zip(v.par_iter())
                .map(|(&x, vn)| {
                    let carry = ((1.0 - x) * dphi_total - h).exp() * vn;
                    let fresh: f64 = gaps
                        .iter()
                        .zip(&sw)
                        .map(|((g, lag), wz)| 0.5 * h * wz * ((1.0 - x) * g - lag).exp())
                        .sum();
                    carry + fresh
                })
                .collect();
            let p1 = density(phi1, t1, &v1);
            let (w1, _) = moments(&p1, 0.0);
            if !(w1 > 0.0) || !w1.is_finite() {
                return Err(Error::Oracle(format!("mean fitness lost positivity at t = {t1}")));
            }
            let d1_new = (1.0 - beta) / w1;
            let (_, dw1) = moments(&p1, d1_new);
            let dd1_new = -(1.0 - beta) * dw1 / (w1 * w1);
            let change = (d1_new - d1).abs() / d1_new.abs();
            d1 = d1_new;
            dd1 = dd1_new;
            next = (phi1, v1, p1, w1);
            if change <= config.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Oracle(format!(
                "fixed point for Phi did not converge in {} iterations at t = {t1}",
                config.max_iterations
            )));
        }
        phi = next.0;
        v = next.1;
        p = next.2;
        w_now = next.3;
        dphi = d1;
        ddphi = dd1;
    }

    let total_mass = quad(&|i| p[i]);
    let initial_mass = quad(&|i| p0v[i]);
    let bulk = p[nq..].to_vec();
    Ok(SemianalyticSolution {
        t,
        density: MeasureWithAtom::from_bulk(output, 0.0, bulk)?,
        total_mass,
        initial_mass,
        phi,
        w: w_now,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub name: String,
    pub computed: f64,
    pub exact: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSuiteReport {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub checks: Vec<IntegralCheck>,
    pub worst_rel_error: f64,
}

/// `2 zeta(3)`, the integral of `x² / (e^x - 1)` over the half line.
pub const TWO_ZETA3: f64 = 2.404_113_806_319_188_5;

/// Closed-form battery on a grid from `x_min` to `x_max` with `n` nodes:
/// `∫ x² e^{-x} = 2`, `∫ x² / (e^x - 1) = 2 zeta(3)`, `∫ x^{1/2} e^{-x} = Γ(3/2)`.
pub fn analytic_integral_suite(x_min: f64, x_max: f64, n: usize) -> Result<IntegralSuiteReport> {
    let grid = Grid::new(x_min, x_max, n)?;
    type Case = (&'static str, fn(f64) -> f64, f64);
    let battery: [Case; 3] = [
        ("x^2 exp(-x)", |x| x * x * (-x).exp(), 2.0),
        ("x^2 / (exp(x) - 1)", |x| x * x / x.exp_m1(), TWO_ZETA3),
        ("x^(1/2) exp(-x)", |x| x.sqrt() * (-x).exp(), 0.886_226_925_452_758),
    ];
    let mut checks = Vec::new();
    for (name, f, exact) in battery {
        let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
        let head = grid.head_or_flat(&values, crate::measures::HEAD_FIT_NODES);
        let computed = grid.integrate(&values, &head)?;
        checks.push(IntegralCheck {
            name: name.to_string(),
            computed,
            exact,
            rel_error: (computed - exact).abs() / exact,
        });
    }
    let worst_rel_error = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(IntegralSuiteReport {
        x_min,
        x_max,
        n,
        checks,
        worst_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OperatorFields;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        for n in [4, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for k in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} k={k}: {s}");
            }
        }
    }

    struct Decay(Grid);

    impl CondensationModel for Decay {
        fn grid(&self) -> &Grid {
            &self.0
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn eval_operators(&self, _: &MeasureWithAtom) -> Result<OperatorFields> {
            let n = self.0.len();
            Ok(OperatorFields { b0: -1.0, b: vec![-1.0; n], c0: 0.0, c: vec![0.0; n] })
        }
    }

    #[test]
    fn rk4_order_on_linear_decay() {
        let grid = Grid::new(1e-3, 1.0, 8).unwrap();
        let m = Decay(grid.clone());
        let p0 = MeasureWithAtom::new(0.0, vec![1.0; 8], HeadModel::ZERO).unwrap();
        let err = |dt: f64| {
            let p = rk4_reference(&m, &p0, 1.0, dt, 1e12).unwrap();
            (p.bulk[0] - (-1f64).exp()).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 < 1e-6);
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn suite_on_default_grid() {
        let r = analytic_integral_suite(1e-6, 50.0, 1024).unwrap();
        assert!(r.worst_rel_error <= 1e-4);
        let zeta = &r.checks[1];
        assert!((zeta.computed - 2.40411).abs() < 1e-4);
        let shifted = analytic_integral_suite(1e-6, 30.0, 1024).unwrap();
        assert!((shifted.checks[1].computed - zeta.computed).abs() < 1e-9);
    }

    #[test]
    fn suite_order_from_coarse_grid() {
        let coarse = analytic_integral_suite(1e-6, 50.0, 64).unwrap();
        let fine = analytic_integral_suite(1e-6, 50.0, 128).unwrap();
        assert!(coarse.worst_rel_error >= 3.5 * fine.worst_rel_error);
    }

    #[test]
    fn semianalytic_trivial_time_and_mass_law() {
        let params = KingmanParams { beta_mut: 0.3, alpha_u: 1.0 };
        let grid = Grid::new(1e-6, 1.0, 256).unwrap();
        let p0 = PowerLawInitial { alpha0: 1.0, amplitude: 2.0, decay: 0.0 };
        let cfg = SemianalyticConfig::default();
        let s0 = kingman_semianalytic(&params, &p0, &grid, 0.0, &cfg).unwrap();
        for (v, &x) in s0.density.bulk.iter().zip(grid.nodes()) {
            assert_eq!(*v, 2.0 * x);
        }
        let p0 = PowerLawInitial { alpha0: 2.0, amplitude: 3.9, decay: 0.0 };
        let s = kingman_semianalytic(&params, &p0, &grid, 5.0, &cfg).unwrap();
        let expect = 1.0 + (s.initial_mass - 1.0) * (-5f64).exp();
        assert!((s.total_mass - expect).abs() < 1e-10, "{} vs {expect}", s.total_mass);
    }
}
