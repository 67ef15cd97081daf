//! Property battery behind `condensate verify`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use condensate_core::models::{mass_rate, stationarity_residual};
use condensate_core::oracle::{
    analytic_integral_suite, compare, kingman_semianalytic, rk4_reference, PowerLawInitial, SemianalyticConfig,
};
use condensate_core::io::write_json;
use condensate_core::measures::HEAD_FIT_NODES;
use condensate_core::{adaptive_advance, CondensationModel, MeasureWithAtom, Model, SimulationState, StepperConfig};

use crate::commands::{model_mass, theory};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Quadrature error allowed on the analytic integral battery.
const SUITE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound,
            value,
            bound,
            note: None,
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub model: &'static str,
    pub all_pass: bool,
    pub checks: Vec<Check>,
}

/// `∫ w(x) (B[p] p + x^alpha C[p]) dx` for the mass weight `w` the model conserves.
fn conserved_rate(model: &Model, p: &MeasureWithAtom) -> CliResult<f64> {
    let Model::Emv(emv) = model else {
        return Ok(mass_rate(model, p)?);
    };
    let grid = model.grid();
    let fields = model.eval_operators(p)?;
    let eta = emv.params().eta;
    let rhs: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&p.bulk)
        .zip(fields.b.iter().zip(&fields.c))
        .map(|((&x, v), (b, c))| (-eta * x).exp() * (b * v + x * x * c))
        .collect();
    Ok(grid.integrate(&rhs, &grid.head_or_flat(&rhs, HEAD_FIT_NODES))?)
}

fn tight(cfg: &StepperConfig) -> StepperConfig {
    StepperConfig {
        rtol: cfg.rtol.min(1e-8),
        atol: cfg.atol.min(1e-11),
        checkpoint_times: Vec::new(),
        ..cfg.clone()
    }
}

pub fn checks(cfg: &RunConfig) -> CliResult<Vec<Check>> {
    let model = cfg.model()?;
    let grid = model.grid().clone();
    let (ic, p0) = cfg.initial_condition(&model)?;
    let mut out = Vec::new();

    let suite = analytic_integral_suite(grid.x_min(), grid.x_max().max(50.0), grid.len())?;
    out.push(
        Check::at_most("integral_suite", suite.worst_rel_error, SUITE_TOLERANCE)
            .note(format!("worst relative error on the analytic battery with {} nodes", grid.len())),
    );

    let bound = 10.0 * suite.worst_rel_error;
    if theory(cfg, &model)?.is_some() {
        let p_inf = model.stationary_solution(cfg.total_mass())?;
        let (sup, b0) = stationarity_residual(&model, &p_inf)?;
        out.push(Check::at_most("stationarity_residual", sup, bound));
        out.push(Check::at_most("stationarity_b0", b0, bound));
        if let Model::Kingman(k) = &model {
            let w = k.mean_fitness(&p_inf)?;
            out.push(Check::at_most("kingman_mean_fitness", (w - (1.0 - k.params().beta_mut)).abs(), 1e-8));
            let f = model.eval_operators(&p_inf)?;
            let bx = f.b.iter().zip(grid.nodes()).map(|(b, x)| (b + x).abs()).fold(0.0, f64::max);
            out.push(Check::at_most("kingman_b_field", bx, 1e-8));
        }
    } else {
        out.push(Check {
            name: "stationarity_residual".into(),
            pass: true,
            value: 0.0,
            bound,
            note: Some("skipped: configuration is subcritical".into()),
        });
    }

    let mass = model_mass(&model, &p0)?;
    let rate = conserved_rate(&model, &p0)?;
    out.push(match &model {
        Model::Kingman(_) => Check::at_most("mass_law", (rate - (1.0 - mass)).abs(), 1e-8)
            .note("|dM/dt - (1 - M)| at p0"),
        _ => Check::at_most("mass_law", rate.abs(), 1e-6 * mass).note("|dM/dt| at p0"),
    });

    let stepper = tight(&cfg.stepper_config(Vec::new())?);
    let (t_rk4, dt_rk4) = match model {
        Model::Kingman(_) => (1.0, 1e-4),
        _ => (0.1, 1e-3),
    };
    let mut state = SimulationState::new(&model, p0.clone())?;
    adaptive_advance(&model, &mut state, &stepper, t_rk4, |_, _| {})?;
    let reference = rk4_reference(&model, &p0, t_rk4, dt_rk4, stepper.blowup_cap)?;
    let dev = compare(&grid, &state.density, &reference, t_rk4)?;
    out.push(
        Check::at_most("oracle_rk4", dev.l1_deviation, 1e-6 * mass)
            .note(format!("L1 distance to fixed-step RK4 (dt = {dt_rk4}) at t = {t_rk4}")),
    );

    if let Model::Kingman(k) = &model {
        let t = 5.0;
        adaptive_advance(&model, &mut state, &stepper, t, |_, _| {})?;
        let shape = PowerLawInitial { alpha0: ic.alpha0, amplitude: ic.eta0, decay: ic.decay };
        let semi = kingman_semianalytic(k.params(), &shape, &grid, t, &SemianalyticConfig::default())?;
        let dev = compare(&grid, &state.density, &semi.density, t)?;
        out.push(Check::at_most("oracle_semianalytic", dev.l1_deviation, 1e-4).note(format!("L1 distance at t = {t}")));
    }

    if let Model::Bsp(b) = &model {
        let samples: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        out.push(Check::at_most("kms_identity", b.params().kms_violation(&samples), 1e-10));
    }
    Ok(out)
}

pub fn verify(cfg: &RunConfig, out: &Path) -> CliResult<VerifyReport> {
    fs::create_dir_all(out)?;
    let model = cfg.model()?;
    let checks = checks(cfg)?;
    let report = VerifyReport {
        model: model.name(),
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    };
    write_json(&out.join("verify.json"), &report)?;
    for c in &report.checks {
        println!(
            "{:<24} {} {:.3e} (bound {:.3e})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.value,
            c.bound
        );
    }
    if !report.all_pass {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(CliError::Verify(failed.join(", ")));
    }
    Ok(report)
}
