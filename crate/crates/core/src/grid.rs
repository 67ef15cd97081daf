//! Geometric spatial mesh on `(0, x_max]` with power-law-aware quadrature.
//!
//! Nodes are log-uniform: `x_i = x_min * r^i`. Quadrature is the trapezoid rule
//! in the logarithmic variable `u = ln x` (weights `h * x_i`, halved at the ends)
//! with two-node end corrections chosen so that constants and linear functions
//! are integrated exactly over `[x_1, x_N]`. On integrands that decay at both
//! ends the log-trapezoid rule converges faster than any power of `h`; on
//! integrands that do not, the corrected rule is third order.
//!
//! The segment `[0, x_1]` is never sampled. Densities there are described by a
//! [`HeadModel`] `c * x^kappa` and integrated analytically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local power-law model `coefficient * x^exponent` for a density on `[0, x_1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub exponent: f64,
    pub coefficient: f64,
}

impl HeadModel {
    pub const ZERO: HeadModel = HeadModel {
        exponent: 0.0,
        coefficient: 0.0,
    };

    pub fn new(exponent: f64, coefficient: f64) -> Result<Self> {
        if !exponent.is_finite() || !coefficient.is_finite() {
            return Err(Error::Numeric(format!(
                "head model must be finite (exponent {exponent}, coefficient {coefficient})"
            )));
        }
        if exponent <= -1.0 {
            return Err(Error::Numeric(format!(
                "head exponent {exponent} is not integrable at zero"
            )));
        }
        Ok(Self {
            exponent,
            coefficient,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.coefficient == 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return if self.exponent > 0.0 {
                0.0
            } else if self.exponent == 0.0 {
                self.coefficient
            } else {
                f64::INFINITY * self.coefficient.signum()
            };
        }
        self.coefficient * x.powf(self.exponent)
    }

    /// `∫_0^x c y^kappa dy`.
    pub fn integral_to(&self, x: f64) -> f64 {
        if self.coefficient == 0.0 || x <= 0.0 {
            return 0.0;
        }
        let k1 = self.exponent + 1.0;
        self.coefficient * x.powf(k1) / k1
    }

    /// Same exponent, coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> HeadModel {
        HeadModel {
            exponent: self.exponent,
            coefficient: self.coefficient * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    x_max: f64,
    ratio: f64,
    log_step: f64,
}

/// `theta * coth(theta) - 1`, accurate for small `theta`.
fn theta_coth_minus_one(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        let t2 = theta * theta;
        t2 / 3.0 - t2 * t2 / 45.0 + 2.0 * t2 * t2 * t2 / 945.0
    } else {
        theta / theta.tanh() - 1.0
    }
}

/// Solve `da + db = e0`, `da*xa + db*xb = e1`.
fn two_node_correction(xa: f64, xb: f64, e0: f64, e1: f64) -> (f64, f64) {
    let db = (e1 - e0 * xa) / (xb - xa);
    (e0 - db, db)
}

impl Grid {
    /// Geometric grid with `n` nodes from `x_min` to `x_max`.
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min <= 0.0 || x_min >= x_max {
            return Err(Error::Config(format!(
                "grid bounds must satisfy 0 < x_min < x_max (got x_min = {x_min}, x_max = {x_max})"
            )));
        }
        if n < 8 {
            return Err(Error::Config(format!("grid needs at least 8 nodes (got {n})")));
        }
        let log_step = (x_max / x_min).ln() / (n - 1) as f64;
        let ln_min = x_min.ln();
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| (ln_min + i as f64 * log_step).exp())
            .collect();
        nodes[0] = x_min;
        nodes[n - 1] = x_max;

        let mut weights: Vec<f64> = nodes.iter().map(|x| log_step * x).collect();
        weights[0] *= 0.5;
        weights[n - 1] *= 0.5;

        // For x^m the log-trapezoid sum equals the exact integral times
        // theta*coth(theta) with theta = (m+1)h/2, so each end carries a known
        // excess that the end corrections remove for m = 0, 1.
        let excess = |x: f64, m: f64| theta_coth_minus_one((m + 1.0) * log_step / 2.0) * x.powf(m + 1.0) / (m + 1.0);
        let (x0, x1) = (nodes[0], nodes[1]);
        let (da, db) = two_node_correction(x0, x1, excess(x0, 0.0), excess(x0, 1.0));
        weights[0] += da;
        weights[1] += db;
        let (xa, xb) = (nodes[n - 2], nodes[n - 1]);
        let (da, db) = two_node_correction(xa, xb, -excess(xb, 0.0), -excess(xb, 1.0));
        weights[n - 2] += da;
        weights[n - 1] += db;

        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::Config(format!(
                "grid too coarse: negative quadrature weight {w}"
            )));
        }

        Ok(Self {
            nodes,
            weights,
            x_max,
            ratio: log_step.exp(),
            log_step,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn x_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub(crate) fn check_len(&self, values: &[f64], what: &str) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Structural(format!(
                "{what} has {} values but the grid has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn check_finite(values: &[f64]) -> Result<()> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(())
    }

    /// `∫_0^{x_max}` of the sampled function, with `head` covering `[0, x_1]`.
    pub fn integrate(&self, values: &[f64], head: &HeadModel) -> Result<f64> {
        self.check_len(values, "integrand")?;
        Self::check_finite(values)?;
        let body: f64 = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum();
        Ok(body + head.integral_to(self.x_min()))
    }

    /// `∫_0^eps` of the sampled function.
    ///
    /// Each node owns the log-cell `[x_i e^{-h/2}, x_i e^{h/2}]` (clipped at the
    /// ends) carrying mass `w_i v_i`; a partially covered cell contributes in
    /// proportion to its covered logarithmic length. For `eps >= x_max` this is
    /// exactly [`Grid::integrate`].
    pub fn integrate_below(&self, values: &[f64], head: &HeadModel, eps: f64) -> Result<f64> {
        self.check_len(values, "integrand")?;
        if eps > self.x_max * (1.0 + 1e-12) {
            return Err(Error::Range {
                what: "eps",
                value: eps,
                lo: 0.0,
                hi: self.x_max,
            });
        }
        if eps >= self.x_max {
            return self.integrate(values, head);
        }
        Self::check_finite(values)?;
        if eps <= 0.0 {
            return Ok(0.0);
        }
        if eps <= self.x_min() {
            return Ok(head.integral_to(eps));
        }
        let n = self.len();
        let half = 0.5 * self.log_step;
        let ln_eps = eps.ln();
        let mut acc = head.integral_to(self.x_min());
        for (i, ((x, w), v)) in self.nodes.iter().zip(&self.weights).zip(values).enumerate() {
            let ln_x = x.ln();
            let lo = if i == 0 { ln_x } else { ln_x - half };
            let hi = if i == n - 1 { ln_x } else { ln_x + half };
            let cell = w * v;
            if hi <= ln_eps {
                acc += cell;
            } else {
                if ln_eps > lo {
                    acc += cell * (ln_eps - lo) / (hi - lo);
                }
                break;
            }
        }
        Ok(acc)
    }

    /// Index `i` with `x_i <= x < x_{i+1}` for `x` in `[x_1, x_N)`.
    fn bracket(&self, x: f64) -> usize {
        let n = self.len();
        let guess = ((x / self.x_min()).ln() / self.log_step).floor();
        let mut i = if guess.is_finite() && guess > 0.0 {
            (guess as usize).min(n - 2)
        } else {
            0
        };
        while i > 0 && self.nodes[i] > x {
            i -= 1;
        }
        while i + 1 < n - 1 && self.nodes[i + 1] <= x {
            i += 1;
        }
        i
    }

    /// Value at `x` in `[0, x_max]`: head model below `x_1`, log-log linear
    /// between positive neighbours, linear otherwise.
    pub fn interpolate(&self, values: &[f64], head: &HeadModel, x: f64) -> Result<f64> {
        self.check_len(values, "values")?;
        if !(0.0..=self.x_max * (1.0 + 1e-12)).contains(&x) {
            return Err(Error::Range {
                what: "x",
                value: x,
                lo: 0.0,
                hi: self.x_max,
            });
        }
        if x < self.x_min() {
            return Ok(head.eval(x));
        }
        if x >= self.x_max {
            return Ok(values[self.len() - 1]);
        }
        let i = self.bracket(x);
        let (xa, xb) = (self.nodes[i], self.nodes[i + 1]);
        let (va, vb) = (values[i], values[i + 1]);
        if x == xa {
            return Ok(va);
        }
        if va > 0.0 && vb > 0.0 {
            let s = (vb / va).ln() / (xb / xa).ln();
            Ok(va * (x / xa).powf(s))
        } else {
            Ok(va + (vb - va) * (x - xa) / (xb - xa))
        }
    }

    /// Least-squares power law through the first `k` samples (log-log fit).
    pub fn estimate_head(&self, values: &[f64], k: usize) -> Result<HeadModel> {
        self.check_len(values, "values")?;
        if k < 2 || k > self.len() {
            return Err(Error::Config(format!("head fit needs 2 <= k <= N (got {k})")));
        }
        if values[..k].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::HeadUnavailable);
        }
        // Centre the abscissa for conditioning.
        let lx: Vec<f64> = self.nodes[..k].iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = values[..k].iter().map(|v| v.ln()).collect();
        let kf = k as f64;
        let mx = lx.iter().sum::<f64>() / kf;
        let my = ly.iter().sum::<f64>() / kf;
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        HeadModel::new(slope, intercept.exp())
    }

    /// Head model with the `kappa = 0` fallback when no power law can be fitted.
    pub fn head_or_flat(&self, values: &[f64], k: usize) -> HeadModel {
        match self.estimate_head(values, k) {
            Ok(h) if h.exponent > -1.0 => h,
            _ => HeadModel {
                exponent: 0.0,
                coefficient: values.first().copied().unwrap_or(0.0).max(0.0),
            },
        }
    }

    /// Integral carried by the last five nodes, a monitor for truncation at `x_max`.
    pub fn tail_mass(&self, values: &[f64]) -> f64 {
        let n = self.len();
        let from = n.saturating_sub(5);
        self.weights[from..]
            .iter()
            .zip(&values[from..])
            .map(|(w, v)| w * v)
            .sum()
    }
}
