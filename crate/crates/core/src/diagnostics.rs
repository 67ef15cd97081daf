//! Scaling-limit diagnostics: `gamma_t`, `Q_t(beta)`, the rescaled profile
//! `(1/t) p_t(x/t)` and its Gamma fit, condensate mass on the `1/t` scale,
//! regular-convergence gaps and the limit constant `R`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::integrator::Checkpoint;
use crate::measures::{mass_below, MeasureWithAtom};
use crate::models::{OperatorFields, TheoryConstants};

/// `gamma(x) = -(b(x) - b(0)) / x` on the nodes plus its extension to `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaField {
    pub at_zero: f64,
    pub values: Vec<f64>,
}

pub fn gamma_field(grid: &Grid, fields: &OperatorFields) -> Result<GammaField> {
    grid.check_len(&fields.b, "b field")?;
    fields.check_finite()?;
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&fields.b)
        .map(|(x, b)| -(b - fields.b0) / x)
        .collect();
    let (x1, x2) = (grid.nodes()[0], grid.nodes()[1]);
    let at_zero = values[0] - x1 * (values[1] - values[0]) / (x2 - x1);
    Ok(GammaField { at_zero, values })
}

/// Time average `(1/(t-s)) ∫_s^t gamma_r dr` by the trapezoid rule over the
/// checkpoints lying in `[s, t]`.
pub fn gamma_bar(grid: &Grid, checkpoints: &[Checkpoint], s: f64, t: f64) -> Result<GammaField> {
    let inside: Vec<&Checkpoint> = checkpoints.iter().filter(|c| c.t >= s && c.t <= t).collect();
    if inside.len() < 2 || !(t > s) {
        return Err(Error::Resolution(format!(
            "time average over [{s}, {t}] needs at least two checkpoints (found {})",
            inside.len()
        )));
    }
    let fields: Vec<GammaField> = inside
        .iter()
        .map(|c| gamma_field(grid, &c.fields))
        .collect::<Result<_>>()?;
    let span = inside[inside.len() - 1].t - inside[0].t;
    let mut acc = GammaField {
        at_zero: 0.0,
        values: vec![0.0; grid.len()],
    };
    for (k, pair) in fields.windows(2).enumerate() {
        let h = 0.5 * (inside[k + 1].t - inside[k].t) / span;
        acc.at_zero += h * (pair[0].at_zero + pair[1].at_zero);
        for (a, (u, v)) in acc.values.iter_mut().zip(pair[0].values.iter().zip(&pair[1].values)) {
            *a += h * (u + v);
        }
    }
    Ok(acc)
}

/// `Q_t(beta) = W_t^{-1} (t+1)^{1+beta}` together with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    pub value: f64,
    pub log: f64,
}

pub fn q_of_t(w_log: f64, t: f64, beta_shape: f64) -> Result<QValue> {
    if !(t >= 0.0) || !w_log.is_finite() {
        return Err(Error::Numeric(format!("Q_t needs t >= 0 and finite w_log (t = {t}, w_log = {w_log})")));
    }
    let log = -w_log + (1.0 + beta_shape) * t.ln_1p();
    Ok(QValue {
        value: log.exp(),
        log,
    })
}

/// Relative spread `(max - min) / mean` of `values` over times in `[t_lo, t_hi]`.
pub fn relative_variation(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Result<f64> {
    let sel: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(_, v)| *v)
        .collect();
    if sel.len() < 2 {
        return Err(Error::Resolution(format!(
            "need at least two samples in [{t_lo}, {t_hi}] (found {})",
            sel.len()
        )));
    }
    let max = sel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sel.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = sel.iter().sum::<f64>() / sel.len() as f64;
    Ok((max - min) / mean.abs())
}

/// Samples of `g(x) = (1/t) p_t(x/t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledProfile {
    pub t: f64,
    pub xs: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn scaled_profile(grid: &Grid, density: &MeasureWithAtom, t: f64, xs: &[f64]) -> Result<ScaledProfile> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("scaled profile needs t > 0 (got {t})")));
    }
    let g = xs
        .iter()
        .map(|&x| grid.interpolate(&density.bulk, &density.head, x / t).map(|v| v / t))
        .collect::<Result<_>>()?;
    Ok(ScaledProfile {
        t,
        xs: xs.to_vec(),
        g,
    })
}

/// Grid nodes mapped to the profile scale, `t x_i`, up to `x_hi`.
pub fn profile_points(grid: &Grid, t: f64, x_hi: f64) -> Vec<f64> {
    grid.nodes().iter().map(|x| t * x).take_while(|&x| x <= x_hi).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub c_hat: f64,
    /// Residual sum of squares of `log g`.
    pub rss: f64,
    pub window: [f64; 2],
    pub points: usize,
}

/// Least-squares fit of `log g = log C + beta log x - gamma x` over the window.
pub fn fit_gamma_profile(profile: &ScaledProfile, window: [f64; 2]) -> Result<ProfileFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::FitWindow(format!("window [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let inside: Vec<(f64, f64)> = profile
        .xs
        .iter()
        .zip(&profile.g)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(x, g)| (*x, *g))
        .collect();
    if let Some((x, g)) = inside.iter().find(|(_, g)| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::FitWindow(format!("profile value {g} at x = {x} is not positive")));
    }
    let g_ref = inside.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let mut cols: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut rhs = Vec::new();
    for &(x, g) in &inside {
        cols[0].push(1.0);
        cols[1].push(x.ln());
        cols[2].push(-x);
        rhs.push((g / g_ref).ln());
    }
    let n = rhs.len();
    if n < 8 {
        return Err(Error::DegenerateWindow(format!("window [{lo}, {hi}] holds {n} points, need 8")));
    }

    // Modified Gram-Schmidt QR.
    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        let norm0 = dot(&cols[j], &cols[j]).sqrt();
        for i in 0..j {
            let rij = dot(&cols[i], &cols[j]);
            r[i][j] = rij;
            let (qi, qj) = split_pair(&mut cols, i, j);
            for (a, b) in qj.iter_mut().zip(qi.iter()) {
                *a -= rij * b;
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if !(norm > 1e-10 * norm0) {
            return Err(Error::DegenerateWindow(format!(
                "fit basis is rank deficient on window [{lo}, {hi}]"
            )));
        }
        r[j][j] = norm;
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut y = rhs.clone();
    let mut qty = [0.0; 3];
    for j in 0..3 {
        qty[j] = dot(&cols[j], &y);
        for (a, b) in y.iter_mut().zip(&cols[j]) {
            *a -= qty[j] * b;
        }
    }
    let mut coef = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| r[i][k] * coef[k]).sum();
        coef[i] = (qty[i] - s) / r[i][i];
    }
    let rss = y.iter().map(|v| v * v).sum();
    Ok(ProfileFit {
        beta_hat: coef[1],
        gamma_hat: coef[2],
        c_hat: g_ref * coef[0].exp(),
        rss,
        window,
        points: n,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn split_pair(cols: &mut [Vec<f64>; 3], i: usize, j: usize) -> (&[f64], &mut [f64]) {
    debug_assert!(i < j);
    let (head, tail) = cols.split_at_mut(j);
    (&head[i], &mut tail[0])
}

/// `C = rho gamma^{beta+1} / Gamma(beta+1)`, so that `∫ C e^{-gamma x} x^beta dx = rho`.
pub fn profile_constant(rho: f64, gamma_rate: f64, beta_shape: f64) -> f64 {
    rho * gamma_rate.powf(beta_shape + 1.0) / gamma(beta_shape + 1.0)
}

/// `rho gamma^beta / Gamma(beta)`, the alternative normalization reported for comparison.
pub fn profile_constant_legacy(rho: f64, gamma_rate: f64, beta_shape: f64) -> f64 {
    rho * gamma_rate.powf(beta_shape) / gamma(beta_shape)
}

/// Limit profile `C e^{-gamma x} x^beta` on `xs` (stored with `t = ∞`).
pub fn theoretical_profile(rho: f64, gamma_rate: f64, beta_shape: f64, xs: &[f64]) -> Result<ScaledProfile> {
    if !(rho > 0.0 && gamma_rate > 0.0 && beta_shape > 0.0) {
        return Err(Error::Numeric(format!(
            "limit profile needs rho, gamma, beta > 0 (got {rho}, {gamma_rate}, {beta_shape})"
        )));
    }
    let c = profile_constant(rho, gamma_rate, beta_shape);
    let g = xs
        .iter()
        .map(|&x| c * (-gamma_rate * x).exp() * x.powf(beta_shape))
        .collect();
    Ok(ScaledProfile {
        t: f64::INFINITY,
        xs: xs.to_vec(),
        g,
    })
}

/// `∫_0^{K/t} p_t(x) dx`.
pub fn condensate_mass(grid: &Grid, density: &MeasureWithAtom, t: f64, k: f64) -> Result<f64> {
    if !(t > 0.0) || !(k >= 0.0) {
        return Err(Error::Config(format!("condensate mass needs t > 0 and K >= 0 (t = {t}, K = {k})")));
    }
    let eps = k / t;
    if eps > grid.x_max() * (1.0 + 1e-12) {
        return Err(Error::Range {
            what: "K/t",
            value: eps,
            lo: 0.0,
            hi: grid.x_max(),
        });
    }
    mass_below(grid, density, eps.min(grid.x_max()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularGaps {
    /// `‖b_t - b_inf‖_{C¹([0, delta])}`.
    pub gap_b_c1: f64,
    /// `‖c_t - c_inf‖_{C([0, delta])}`.
    pub gap_c_c0: f64,
}

pub fn regular_convergence_gaps(
    grid: &Grid,
    fields_t: &OperatorFields,
    fields_inf: &OperatorFields,
    delta: f64,
) -> Result<RegularGaps> {
    grid.check_len(&fields_t.b, "fields_t")?;
    grid.check_len(&fields_inf.b, "fields_inf")?;
    let m = grid.nodes().iter().take_while(|&&x| x <= delta * (1.0 + 1e-12)).count();
    if m < 3 {
        return Err(Error::Resolution(format!(
            "only {m} nodes lie in [0, {delta}], need at least 3"
        )));
    }
    let mut xs = vec![0.0];
    xs.extend_from_slice(&grid.nodes()[..m]);
    let mut db = vec![fields_t.b0 - fields_inf.b0];
    db.extend((0..m).map(|i| fields_t.b[i] - fields_inf.b[i]));
    let mut dc = vec![fields_t.c0 - fields_inf.c0];
    dc.extend((0..m).map(|i| fields_t.c[i] - fields_inf.c[i]));

    let sup = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let last = xs.len() - 1;
    let slope = |i: usize| -> f64 {
        let (a, b) = match i {
            0 => (0, 1),
            i if i == last => (last - 1, last),
            i => (i - 1, i + 1),
        };
        (db[b] - db[a]) / (xs[b] - xs[a])
    };
    let dsup = (0..=last).map(slope).map(f64::abs).fold(0.0, f64::max);
    Ok(RegularGaps {
        gap_b_c1: sup(&db) + dsup,
        gap_c_c0: sup(&dc),
    })
}

/// The constant `R` with `Q_t(beta) -> R / rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RConstant {
    /// Contribution of the source term (present when `beta = alpha`).
    pub source_term: f64,
    /// Contribution of the initial condition (present when `beta = alpha0`).
    pub initial_term: f64,
    pub r: f64,
    /// Predicted limit `R / rho` of `Q_t(beta)`.
    pub q_limit: f64,
}

/// `R = 1_{beta=alpha} Γ(alpha+1)/γ^{alpha+1} ∫_0^∞ W_s^{-1} c_s(0) ds
///    + 1_{beta=alpha0} Γ(alpha0+1)/γ^{alpha0+1} η(0)`.
///
/// The time integral uses the trapezoid rule over the checkpoints (which must
/// start at `t = 0`) and closes the tail past the last checkpoint `T` with
/// `c_inf(0) Q_T (T+1)^{-beta} / beta`.
pub fn r_constant(
    checkpoints: &[Checkpoint],
    constants: &TheoryConstants,
    eta0_at_zero: f64,
    c_inf_at_zero: f64,
) -> Result<RConstant> {
    if checkpoints.len() < 16 {
        return Err(Error::Resolution(format!(
            "R needs at least 16 checkpoints (found {})",
            checkpoints.len()
        )));
    }
    if checkpoints[0].t != 0.0 {
        return Err(Error::Resolution("checkpoints must start at t = 0".into()));
    }
    let TheoryConstants {
        alpha,
        alpha0,
        gamma: g,
        beta_shape: beta,
        rho,
        ..
    } = *constants;
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    let source_term = if same(beta, alpha) {
        let integrand: Vec<f64> = checkpoints.iter().map(|c| (-c.w_log).exp() * c.fields.c0).collect();
        let body: f64 = checkpoints
            .windows(2)
            .zip(integrand.windows(2))
            .map(|(c, v)| 0.5 * (c[1].t - c[0].t) * (v[0] + v[1]))
            .sum();
        let last = &checkpoints[checkpoints.len() - 1];
        let q_last = q_of_t(last.w_log, last.t, beta)?;
        let tail = c_inf_at_zero * q_last.value * (last.t + 1.0).powf(-beta) / beta;
        gamma(alpha + 1.0) / g.powf(alpha + 1.0) * (body + tail)
    } else {
        0.0
    };
    let initial_term = if same(beta, alpha0) {
        gamma(alpha0 + 1.0) / g.powf(alpha0 + 1.0) * eta0_at_zero
    } else {
        0.0
    };
    let r = source_term + initial_term;
    Ok(RConstant {
        source_term,
        initial_term,
        r,
        q_limit: r / rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaSplit {
    /// `∫ κ = R / Q_T`, the mass carried by the emerging condensate.
    pub kappa_mass: f64,
    /// `∫_0^eps x^{alpha-1} c_inf(x) / gamma_inf(x) dx`.
    pub bulk_mass_below_eps: f64,
}

/// Both terms of the limit mass identity `lim ∫_0^eps p_t = ∫ κ + ∫_0^eps x^{alpha-1} c_inf / gamma_inf`.
pub fn kappa_and_bulk_split(
    grid: &Grid,
    constants: &TheoryConstants,
    r: &RConstant,
    q_final: f64,
    fields_inf: &OperatorFields,
    eps: f64,
) -> Result<KappaSplit> {
    if !(q_final > 0.0) || !q_final.is_finite() {
        return Err(Error::Numeric(format!("Q_T must be positive and finite (got {q_final})")));
    }
    let gam = gamma_field(grid, fields_inf)?;
    let alpha = constants.alpha;
    let integrand: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(fields_inf.c.iter().zip(&gam.values))
        .map(|(&x, (c, g))| x.powf(alpha - 1.0) * c / g)
        .collect();
    if let Some(v) = integrand.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("bulk integrand is not finite ({v})")));
    }
    let head = HeadModel::new(alpha - 1.0, fields_inf.c0 / gam.at_zero)?;
    Ok(KappaSplit {
        kappa_mass: r.r / q_final,
        bulk_mass_below_eps: grid.integrate_below(&integrand, &head, eps)?,
    })
}

/// Time series of the diagnostics evaluated at checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsTrace {
    pub times: Vec<f64>,
    pub q_values: Vec<f64>,
    pub b0_values: Vec<f64>,
    /// `∫_0^{K/t} p_t` (empty entry `NaN` at `t = 0`).
    pub condensate_estimates: Vec<f64>,
    pub gap_b_c1: Vec<f64>,
    pub gap_c_c0: Vec<f64>,
}

impl DiagnosticsTrace {
    pub fn from_checkpoints(
        grid: &Grid,
        checkpoints: &[Checkpoint],
        fields_inf: &OperatorFields,
        beta_shape: f64,
        k: f64,
        delta: f64,
    ) -> Result<Self> {
        let mut trace = DiagnosticsTrace {
            times: Vec::new(),
            q_values: Vec::new(),
            b0_values: Vec::new(),
            condensate_estimates: Vec::new(),
            gap_b_c1: Vec::new(),
            gap_c_c0: Vec::new(),
        };
        for c in checkpoints {
            trace.times.push(c.t);
            trace.q_values.push(q_of_t(c.w_log, c.t, beta_shape)?.value);
            trace.b0_values.push(c.fields.b0);
            let mass = if c.t > 0.0 && k / c.t <= grid.x_max() {
                condensate_mass(grid, &c.density, c.t, k)?
            } else {
                f64::NAN
            };
            trace.condensate_estimates.push(mass);
            let gaps = regular_convergence_gaps(grid, &c.fields, fields_inf, delta)?;
            trace.gap_b_c1.push(gaps.gap_b_c1);
            trace.gap_c_c0.push(gaps.gap_c_c0);
        }
        Ok(trace)
    }
}
