//! Exponential midpoint time stepping for `∂t p = b_t p + x^alpha c_t`.
//!
//! One step of size `dt` freezes the coefficients at the midpoint and solves the
//! resulting linear-affine equation exactly:
//!
//! ```text
//! p_half = e^{b dt/2} p + x^alpha c (dt/2) phi1(b dt/2)          (b, c at the start)
//! p'     = e^{b_m dt} p + x^alpha c_m dt phi1(b_m dt)            (b_m, c_m at p_half)
//! ```
//!
//! and advances `w_log = ∫ b_s(0) ds` by `b_m(0) dt`. Step sizes are controlled by
//! step doubling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{total_mass, MeasureWithAtom};
use crate::models::{CondensationModel, OperatorFields};

/// `phi1(z) = (e^z - 1) / z`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        z.exp_m1() / z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub blowup_cap: f64,
    /// Times at which density and operator fields are stored.
    pub checkpoint_times: Vec<f64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_max: 2.0,
            rtol: 1e-7,
            atol: 1e-10,
            blowup_cap: 1e12,
            checkpoint_times: Vec::new(),
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_init > 0.0 && self.dt_init <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::Config(format!(
                "stepper requires 0 < dt_init <= dt_max (got dt_init = {}, dt_max = {})",
                self.dt_init, self.dt_max
            )));
        }
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::Config(format!(
                "stepper tolerances must be > 0 (got rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.blowup_cap > 0.0) {
            return Err(Error::Config(format!(
                "stepper.blowup_cap must be > 0 (got {})",
                self.blowup_cap
            )));
        }
        if let Some(t) = self.checkpoint_times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("checkpoint time {t} must be finite and >= 0")));
        }
        if self.checkpoint_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("checkpoint times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `0` followed by `n` geometrically spaced times from `t_first` to `t_end`.
pub fn geometric_schedule(t_first: f64, t_end: f64, n: usize) -> Vec<f64> {
    if n < 2 || !(t_end > t_first) || !(t_first > 0.0) {
        return if t_end > 0.0 { vec![0.0, t_end] } else { vec![0.0] };
    }
    let ratio = (t_end / t_first).ln() / (n - 1) as f64;
    let mut out = vec![0.0];
    out.extend((0..n - 1).map(|i| t_first * (ratio * i as f64).exp()));
    out.push(t_end);
    out
}

/// Stored state at a configured checkpoint time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub w_log: f64,
    pub density: MeasureWithAtom,
    pub fields: OperatorFields,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub density: MeasureWithAtom,
    /// `∫_0^t b_s(0) ds`.
    pub w_log: f64,
    /// Operator fields at the current density.
    pub fields: OperatorFields,
    pub checkpoints: Vec<Checkpoint>,
    pub step_count: usize,
    pub rejected_steps: usize,
    pub min_density_seen: f64,
    dt_next: Option<f64>,
    next_checkpoint: usize,
}

impl SimulationState {
    pub fn new<M: CondensationModel + ?Sized>(model: &M, density: MeasureWithAtom) -> Result<Self> {
        model.grid().check_len(&density.bulk, "initial density")?;
        if density.atom_mass != 0.0 {
            return Err(Error::Config("simulated states must be atomless".into()));
        }
        let fields = model.eval_operators(&density)?;
        Ok(Self {
            t: 0.0,
            min_density_seen: density.min_bulk(),
            density,
            w_log: 0.0,
            fields,
            checkpoints: Vec::new(),
            step_count: 0,
            rejected_steps: 0,
            dt_next: None,
            next_checkpoint: 0,
        })
    }

    /// Step size the controller will try next, if a step has been taken.
    pub fn dt_next(&self) -> Option<f64> {
        self.dt_next
    }

    fn record_checkpoint(&mut self) {
        self.checkpoints.push(Checkpoint {
            t: self.t,
            w_log: self.w_log,
            density: self.density.clone(),
            fields: self.fields.clone(),
        });
    }
}

fn x_alpha<M: CondensationModel + ?Sized>(model: &M) -> Vec<f64> {
    let alpha = model.alpha();
    model.grid().nodes().iter().map(|x| x.powf(alpha)).collect()
}

/// `e^{b dt} p + xa c dt phi1(b dt)` on every node.
fn frozen_update(p: &[f64], f: &OperatorFields, xa: &[f64], dt: f64) -> Vec<f64> {
    p.par_iter()
        .zip(f.b.par_iter())
        .zip(f.c.par_iter().zip(xa.par_iter()))
        .map(|((p, b), (c, xa))| {
            let z = b * dt;
            z.exp() * p + xa * c * dt * phi1(z)
        })
        .collect()
}

fn check_blowup<M: CondensationModel + ?Sized>(model: &M, bulk: &[f64], t: f64, cap: f64) -> Result<()> {
    let worst = bulk
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > cap);
    if let Some((i, &value)) = worst {
        return Err(Error::BlowUp {
            t,
            x: model.grid().nodes()[i],
            value,
        });
    }
    Ok(())
}

struct Trial {
    density: MeasureWithAtom,
    /// `b_m(0) dt`.
    w_increment: f64,
}

fn step_from<M: CondensationModel + ?Sized>(
    model: &M,
    p: &MeasureWithAtom,
    fields: &OperatorFields,
    xa: &[f64],
    dt: f64,
    t_end: f64,
    cap: f64,
) -> Result<Trial> {
    let grid = model.grid();
    let half = frozen_update(&p.bulk, fields, xa, 0.5 * dt);
    check_blowup(model, &half, t_end, cap)?;
    let half = MeasureWithAtom::from_bulk(grid, 0.0, half)?;
    let mid = model.eval_operators(&half)?;
    let full = frozen_update(&p.bulk, &mid, xa, dt);
    check_blowup(model, &full, t_end, cap)?;
    Ok(Trial {
        density: MeasureWithAtom::from_bulk(grid, 0.0, full)?,
        w_increment: mid.b0 * dt,
    })
}

/// One exponential midpoint step of size `dt` from `state`.
pub fn exponential_step<M: CondensationModel + ?Sized>(
    model: &M,
    state: &SimulationState,
    dt: f64,
    blowup_cap: f64,
) -> Result<SimulationState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be > 0 (got {dt})")));
    }
    let xa = x_alpha(model);
    let trial = step_from(model, &state.density, &state.fields, &xa, dt, state.t + dt, blowup_cap)?;
    let fields = model.eval_operators(&trial.density)?;
    let mut next = state.clone();
    next.t += dt;
    next.w_log += trial.w_increment;
    next.min_density_seen = next.min_density_seen.min(trial.density.min_bulk());
    next.density = trial.density;
    next.fields = fields;
    next.step_count += 1;
    Ok(next)
}

/// Adaptive integration of `state` up to `t_target`.
///
/// `observer` is called after every accepted step with the new state and the
/// step size just used. Checkpoints listed in `config` are hit exactly.
pub fn adaptive_advance<M, F>(
    model: &M,
    state: &mut SimulationState,
    config: &StepperConfig,
    t_target: f64,
    mut observer: F,
) -> Result<()>
where
    M: CondensationModel + ?Sized,
    F: FnMut(&SimulationState, f64),
{
    config.validate()?;
    if !t_target.is_finite() || t_target < state.t {
        return Err(Error::Config(format!(
            "target time {t_target} precedes current time {}",
            state.t
        )));
    }
    let times = &config.checkpoint_times;
    while state.next_checkpoint < times.len() && times[state.next_checkpoint] < state.t {
        state.next_checkpoint += 1;
    }
    let at_checkpoint = |s: &SimulationState| {
        s.next_checkpoint < times.len() && (times[s.next_checkpoint] - s.t).abs() <= 1e-12 * s.t.max(1.0)
    };
    if at_checkpoint(state) {
        state.record_checkpoint();
        state.next_checkpoint += 1;
    }
    if t_target == state.t {
        return Ok(());
    }

    let xa = x_alpha(model);
    let dt_floor = 1e-12 * t_target;
    let mut dt = state.dt_next.unwrap_or(config.dt_init).min(config.dt_max);
    while state.t < t_target {
        let stop = times
            .get(state.next_checkpoint)
            .copied()
            .filter(|&c| c < t_target)
            .unwrap_or(t_target);
        let remaining = stop - state.t;
        let truncated = dt >= remaining * (1.0 - 1e-12);
        let h = if truncated { remaining } else { dt };
        let t_new = if truncated { stop } else { state.t + h };

        let cap = config.blowup_cap;
        let full = step_from(model, &state.density, &state.fields, &xa, h, t_new, cap)?;
        let first = step_from(model, &state.density, &state.fields, &xa, 0.5 * h, t_new, cap)?;
        let mid_fields = model.eval_operators(&first.density)?;
        let second = step_from(model, &first.density, &mid_fields, &xa, 0.5 * h, t_new, cap)?;

        let est = second
            .density
            .bulk
            .iter()
            .zip(&full.density.bulk)
            .zip(&state.density.bulk)
            .map(|((a, b), p)| (a - b).abs() / (config.atol + config.rtol * a.abs().max(p.abs())))
            .fold(0.0, f64::max);
        let factor = if est == 0.0 {
            4.0
        } else {
            (0.9 * est.powf(-1.0 / 3.0)).clamp(0.25, 4.0)
        };
        let dt_new = (h * factor).min(config.dt_max);

        if est <= 1.0 {
            state.t = t_new;
            state.w_log += first.w_increment + second.w_increment;
            state.fields = model.eval_operators(&second.density)?;
            state.min_density_seen = state.min_density_seen.min(second.density.min_bulk());
            state.density = second.density;
            state.step_count += 1;
            dt = if truncated { dt.max(dt_new) } else { dt_new };
            if at_checkpoint(state) {
                state.record_checkpoint();
                state.next_checkpoint += 1;
            }
            observer(state, h);
        } else {
            state.rejected_steps += 1;
            dt = dt_new;
            if dt < dt_floor {
                return Err(Error::Stiffness { t: state.t, dt });
            }
        }
    }
    state.dt_next = Some(dt);
    Ok(())
}

/// Total mass of the current density.
pub fn state_mass<M: CondensationModel + ?Sized>(model: &M, state: &SimulationState) -> Result<f64> {
    total_mass(model.grid(), &state.density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, HeadModel};
    use crate::measures::InitialCondition;
    use crate::models::{Kingman, KingmanParams};

    /// `b` and `c` independent of `p` and `t`.
    struct Frozen {
        grid: Grid,
        b: Vec<f64>,
        c: Vec<f64>,
        alpha: f64,
    }

    impl CondensationModel for Frozen {
        fn grid(&self) -> &Grid {
            &self.grid
        }
        fn alpha(&self) -> f64 {
            self.alpha
        }
        fn eval_operators(&self, _: &MeasureWithAtom) -> Result<OperatorFields> {
            Ok(OperatorFields {
                b0: self.b[0],
                b: self.b.clone(),
                c0: self.c[0],
                c: self.c.clone(),
            })
        }
    }

    #[test]
    fn phi1_branches_agree() {
        assert_eq!(phi1(0.0), 1.0);
        for z in [9.9e-5f64, -9.9e-5, 1.01e-4, -1.01e-4] {
            let exact = z.exp_m1() / z;
            assert!((phi1(z) - exact).abs() < 1e-15);
        }
        assert!((phi1(1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn frozen_linear_system_is_exact() {
        let grid = Grid::new(1e-3, 5.0, 32).unwrap();
        let b: Vec<f64> = grid.nodes().iter().map(|x| -0.5 - x).collect();
        let c: Vec<f64> = grid.nodes().iter().map(|x| 1.0 + x).collect();
        let m = Frozen { grid: grid.clone(), b: b.clone(), c: c.clone(), alpha: 1.5 };
        let p0: Vec<f64> = grid.nodes().iter().map(|x| x * x).collect();
        let s = SimulationState::new(&m, MeasureWithAtom::from_bulk(&grid, 0.0, p0.clone()).unwrap()).unwrap();
        let dt = 0.37;
        let s1 = exponential_step(&m, &s, dt, 1e12).unwrap();
        for i in 0..grid.len() {
            let x = grid.nodes()[i];
            let z = b[i] * dt;
            let exact = z.exp() * p0[i] + x.powf(1.5) * c[i] * dt * phi1(z);
            assert!((s1.density.bulk[i] - exact).abs() <= 4.0 * f64::EPSILON * exact.abs());
        }
        assert!((s1.w_log - b[0] * dt).abs() < 1e-15);
    }

    #[test]
    fn pure_decay() {
        let grid = Grid::new(1e-3, 5.0, 16).unwrap();
        let m = Frozen { grid: grid.clone(), b: vec![-1.0; 16], c: vec![0.0; 16], alpha: 1.0 };
        let p0 = MeasureWithAtom::new(0.0, vec![1.0; 16], HeadModel::new(0.0, 1.0).unwrap()).unwrap();
        let s = SimulationState::new(&m, p0).unwrap();
        let s1 = exponential_step(&m, &s, 0.5, 1e12).unwrap();
        assert!(s1.density.bulk.iter().all(|v| (v - (-0.5f64).exp()).abs() < 1e-15));
    }

    #[test]
    fn blowup_is_reported() {
        let grid = Grid::new(1e-3, 5.0, 16).unwrap();
        let m = Frozen { grid: grid.clone(), b: vec![50.0; 16], c: vec![0.0; 16], alpha: 1.0 };
        let p0 = MeasureWithAtom::new(0.0, vec![1.0; 16], HeadModel::ZERO).unwrap();
        let mut s = SimulationState::new(&m, p0).unwrap();
        let cfg = StepperConfig { blowup_cap: 1e6, ..Default::default() };
        let err = adaptive_advance(&m, &mut s, &cfg, 10.0, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
    }

    fn kingman() -> Kingman {
        Kingman::new(
            Grid::new(1e-6, 1.0, 256).unwrap(),
            KingmanParams { beta_mut: 0.3, alpha_u: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn kingman_mass_law_and_checkpoints() {
        let m = kingman();
        let ic = InitialCondition::new(m.grid(), 2.0, 1.3, 0.0).unwrap();
        let mut s = SimulationState::new(&m, ic.density(m.grid())).unwrap();
        let cfg = StepperConfig { checkpoint_times: vec![0.0, 1.0, 2.5, 5.0], ..Default::default() };
        let mut seen = 0;
        adaptive_advance(&m, &mut s, &cfg, 5.0, |_, _| seen += 1).unwrap();
        assert_eq!(seen, s.step_count);
        assert_eq!(s.t, 5.0);
        let ts: Vec<f64> = s.checkpoints.iter().map(|c| c.t).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.5, 5.0]);
        let mass = state_mass(&m, &s).unwrap();
        assert!((mass - (1.0 + 0.3 * (-5f64).exp())).abs() < 1e-6, "{mass}");
        assert!(s.min_density_seen >= -cfg.atol);

        let before = s.clone();
        adaptive_advance(&m, &mut s, &cfg, 5.0, |_, _| panic!("no steps expected")).unwrap();
        assert_eq!(s.step_count, before.step_count);
        assert_eq!(s.density, before.density);
    }

    #[test]
    fn deterministic_trajectory() {
        let m = kingman();
        let run = || {
            let ic = InitialCondition::new(m.grid(), 1.0, 1.0, 0.0).unwrap();
            let mut s = SimulationState::new(&m, ic.density(m.grid())).unwrap();
            adaptive_advance(&m, &mut s, &StepperConfig::default(), 3.0, |_, _| {}).unwrap();
            (s.density.bulk, s.w_log)
        };
        let (a, wa) = run();
        let (b, wb) = run();
        assert_eq!(wa.to_bits(), wb.to_bits());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = StepperConfig { dt_init: 2.0, dt_max: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { checkpoint_times: vec![2.0, 1.0], ..Default::default() };
        assert!(bad.validate().is_err());
    }

}
