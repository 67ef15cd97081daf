//! `simulate`, `fit` and `stationary`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use condensate_core::diagnostics::{
    condensate_mass, fit_gamma_profile, profile_constant, profile_constant_legacy, profile_points, q_of_t,
    r_constant, scaled_profile, theoretical_profile,
};
use condensate_core::integrator::geometric_schedule;
use condensate_core::io::{
    read_snapshot, time_label, write_csv, write_json, write_profile, write_snapshot, FitReport, TimeseriesRow,
};
use condensate_core::measures::total_mass;
use condensate_core::{
    adaptive_advance, Checkpoint, CondensationCriterion, CondensationModel, Error as CoreError, Grid,
    MeasureWithAtom, Model, SimulationState, TheoryConstants,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// The mass the model's dynamics act on: `∫ e^{-eta x} p` for EMV, `∫ p` otherwise.
pub fn model_mass(model: &Model, p: &MeasureWithAtom) -> CliResult<f64> {
    Ok(match model {
        Model::Emv(emv) => emv.conserved_mass(p)?,
        _ => total_mass(model.grid(), p)?,
    })
}

/// Theory constants, or `None` when the configured mass does not condense.
pub fn theory(cfg: &RunConfig, model: &Model) -> CliResult<Option<TheoryConstants>> {
    match model.theory_constants(cfg.total_mass(), cfg.initial.alpha0) {
        Ok(tc) => Ok(Some(tc)),
        Err(CoreError::NoCondensation { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn checkpoint_schedule(cfg: &RunConfig) -> Vec<f64> {
    let run = &cfg.run;
    let mut times = geometric_schedule(run.t_first, run.t_end, run.checkpoints);
    times.extend(&run.snapshot_times);
    times.push(run.t_end);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

fn row(model: &Model, state: &SimulationState, beta_shape: f64, dt: f64) -> CliResult<TimeseriesRow> {
    Ok(TimeseriesRow {
        t: state.t,
        total_mass: model_mass(model, &state.density)?,
        b0: state.fields.b0,
        w_log: state.w_log,
        q_t: q_of_t(state.w_log, state.t, beta_shape)?.value,
        dt,
        min_density: state.min_density_seen,
    })
}

/// Runs the configured model to `t_end` and writes all artifacts into `out`.
///
/// Returns the fit report, or `None` when there is nothing to fit (`t_end = 0`
/// or a subcritical configuration).
pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<Option<FitReport>> {
    fs::create_dir_all(out)?;
    let model = cfg.model()?;
    let grid = model.grid().clone();
    let (ic, p0) = cfg.initial_condition(&model)?;
    let beta_shape = model.alpha().min(cfg.initial.alpha0);
    let t_end = cfg.run.t_end;

    let stepper = cfg.stepper_config(checkpoint_schedule(cfg))?;
    let mut state = SimulationState::new(&model, p0)?;
    let mut rows = vec![row(&model, &state, beta_shape, 0.0)?];
    let mut observed: CliResult<()> = Ok(());
    adaptive_advance(&model, &mut state, &stepper, t_end, |s, dt| {
        if observed.is_ok() {
            observed = row(&model, s, beta_shape, dt).map(|r| rows.push(r));
        }
    })?;
    observed?;
    write_csv(&out.join("timeseries.csv"), &rows)?;

    let mut snapshot_times = cfg.run.snapshot_times.clone();
    snapshot_times.push(t_end);
    for cp in state.checkpoints.iter().filter(|c| snapshot_times.contains(&c.t)) {
        write_snapshot(out, &grid, cp.t, &cp.density)?;
    }
    if t_end == 0.0 {
        return Ok(None);
    }
    let Some(tc) = theory(cfg, &model)? else {
        eprintln!("note: configuration is subcritical; no condensate profile to fit");
        return Ok(None);
    };
    let report = fit_report(cfg, &model, &tc, &state.density, t_end, out, Some((&state.checkpoints, ic.eta0)))?;
    Ok(Some(report))
}

fn fit_report(
    cfg: &RunConfig,
    model: &Model,
    tc: &TheoryConstants,
    density: &MeasureWithAtom,
    t: f64,
    out: &Path,
    history: Option<(&[Checkpoint], f64)>,
) -> CliResult<FitReport> {
    let grid = model.grid();
    let gamma = tc.gamma;
    let window = cfg.diagnostics.fit_window.unwrap_or([0.5 / gamma, 5.0 / gamma]);
    let xs = profile_points(grid, t, (10.0 / gamma).max(window[1]));
    let measured = scaled_profile(grid, density, t, &xs)?;
    let limit = theoretical_profile(tc.rho, gamma, tc.beta_shape, &xs)?;
    write_profile(out, &measured, &limit)?;
    let fit = fit_gamma_profile(&measured, window)?;

    let q_t = q_of_t(
        history.and_then(|(c, _)| c.last()).map_or(f64::NAN, |c| c.w_log),
        t,
        tc.beta_shape,
    )
    .map(|q| q.value)
    .unwrap_or(f64::NAN);
    let r_over_rho = history.and_then(|(checkpoints, eta0)| {
        let p_inf = model.stationary_solution(cfg.total_mass()).ok()?;
        let c_inf0 = model.eval_operators(&p_inf).ok()?.c0;
        let r = r_constant(checkpoints, tc, eta0, c_inf0).ok()?;
        (r.r > 0.0).then(|| q_t * tc.rho / r.r)
    });
    let report = FitReport {
        t,
        beta_hat: fit.beta_hat,
        gamma_hat: fit.gamma_hat,
        c_hat: fit.c_hat,
        rss: fit.rss,
        window: fit.window,
        beta_theory: tc.beta_shape,
        gamma_theory: gamma,
        rho_theory: tc.rho,
        condensate_estimate: condensate_mass(grid, density, t, cfg.diagnostics.k)?,
        q_t,
        r_over_rho,
        c_theory: profile_constant(tc.rho, gamma, tc.beta_shape),
        c_theory_legacy: profile_constant_legacy(tc.rho, gamma, tc.beta_shape),
    };
    write_json(&out.join("fit.json"), &report)?;
    Ok(report)
}

/// Refits the `t_end` snapshot of a previous `simulate` run in `out`.
pub fn fit(cfg: &RunConfig, out: &Path) -> CliResult<FitReport> {
    let model = cfg.model()?;
    let t = cfg.run.t_end;
    if t == 0.0 {
        return Err(CliError::Config("fit needs run.t_end > 0".into()));
    }
    let path = out.join(format!("snapshot_t{}.csv", time_label(t)));
    if !path.exists() {
        return Err(CliError::Io(format!("{} not found; run simulate first", path.display())));
    }
    let (_, xs, density) = read_snapshot(&path)?;
    if xs != model.grid().nodes() {
        return Err(CliError::Config(format!("{} was written on a different grid", path.display())));
    }
    let tc = theory(cfg, &model)?.ok_or_else(|| {
        CliError::Config("configuration is subcritical; there is no condensate profile to fit".into())
    })?;
    fit_report(cfg, &model, &tc, &density, t, out, None)
}

#[derive(Debug, Serialize)]
pub struct StationaryReport {
    pub model: &'static str,
    pub total_mass: f64,
    pub criterion: CondensationCriterion,
    pub theory: Option<TheoryConstants>,
    pub bulk_mass: Option<f64>,
}

#[derive(Serialize)]
struct StationaryRow {
    x: f64,
    q: f64,
}

/// Writes the stationary limit (`stationary.csv`) and theory constants (`stationary.json`).
pub fn stationary(cfg: &RunConfig, out: &Path) -> CliResult<StationaryReport> {
    fs::create_dir_all(out)?;
    let model = cfg.model()?;
    let criterion = model.condensation_criterion(cfg.total_mass())?;
    let theory = theory(cfg, &model)?;
    let mut bulk_mass = None;
    if theory.is_some() {
        let p = model.stationary_solution(cfg.total_mass())?;
        let grid: &Grid = model.grid();
        let rows: Vec<StationaryRow> = grid.nodes().iter().zip(&p.bulk).map(|(&x, &q)| StationaryRow { x, q }).collect();
        write_csv(&out.join("stationary.csv"), &rows)?;
        bulk_mass = Some(model_mass(&model, &p)? - p.atom_mass);
    }
    let report = StationaryReport {
        model: model.name(),
        total_mass: cfg.total_mass(),
        criterion,
        theory,
        bulk_mass,
    };
    write_json(&out.join("stationary.json"), &report)?;
    Ok(report)
}
