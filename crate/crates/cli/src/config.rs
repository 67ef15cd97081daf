//! Run configuration: a strict TOML schema, validated before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use condensate_core::measures::InitialCondition;
use condensate_core::{
    Bsp, BspParams, ChatKernel, Emv, EmvParams, Grid, Kingman, KingmanParams, MeasureWithAtom, Model,
    Sigma, StepperConfig,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Kingman,
    Emv,
    Bsp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub grid: GridSection,
    pub kingman: Option<KingmanSection>,
    pub emv: Option<EmvSection>,
    pub bsp: Option<BspSection>,
    pub initial: InitialSection,
    #[serde(default)]
    pub stepper: StepperSection,
    pub run: RunSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_x_min() -> f64 {
    1e-6
}

fn default_n() -> usize {
    1024
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KingmanSection {
    pub beta_mut: f64,
    #[serde(default = "one")]
    pub alpha_u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmvSection {
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "unit_sigma")]
    pub sigma: Sigma,
}

fn unit_sigma() -> Sigma {
    Sigma::Constant { s0: 1.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BspSection {
    pub beta_temp: f64,
    /// Defaults to the three-dimensional box when both are absent.
    pub alpha_f: Option<f64>,
    pub f0: Option<f64>,
    pub chat: ChatSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatSection {
    #[serde(default = "one")]
    pub c0: f64,
    pub a: f64,
    pub kms_beta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub alpha0: f64,
    /// Total mass of `p_0`; for EMV the conserved mass `∫ e^{-eta x} p_0`.
    pub mass: f64,
    #[serde(default)]
    pub decay: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt_init: f64,
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub blowup_cap: f64,
}

impl Default for StepperSection {
    fn default() -> Self {
        let d = StepperConfig::default();
        Self {
            dt_init: d.dt_init,
            dt_max: d.dt_max,
            rtol: d.rtol,
            atol: d.atol,
            blowup_cap: d.blowup_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Number of geometrically spaced checkpoints kept for diagnostics.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_t_first")]
    pub t_first: f64,
}

fn default_checkpoints() -> usize {
    250
}

fn default_t_first() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub delta: f64,
    /// Condensate window `[0, k / t]`.
    pub k: f64,
    pub eps: f64,
    /// Fit window on the profile scale; defaults to `[0.5, 5] / gamma`.
    pub fit_window: Option<[f64; 2]>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            delta: 0.1,
            k: 50.0,
            eps: 0.1,
            fit_window: None,
        }
    }
}

pub const SWEEPABLE: [&str; 4] = ["alpha0", "beta_mut", "eta", "total_mass"];

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let present = [
            (ModelKind::Kingman, self.kingman.is_some(), "kingman"),
            (ModelKind::Emv, self.emv.is_some(), "emv"),
            (ModelKind::Bsp, self.bsp.is_some(), "bsp"),
        ];
        for (kind, set, name) in present {
            if kind == self.model && !set {
                return Err(CliError::Config(format!("model = \"{name}\" needs a [{name}] section")));
            }
            if kind != self.model && set {
                return Err(CliError::Config(format!("[{name}] section given but model is {:?}", self.model)));
            }
        }
        let run = &self.run;
        if !(run.t_end >= 0.0) || !run.t_end.is_finite() {
            return Err(CliError::Config(format!("run.t_end must be finite and >= 0 (got {})", run.t_end)));
        }
        if let Some(t) = run.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= run.t_end)) {
            return Err(CliError::Config(format!("run.snapshot_times entry {t} outside [0, t_end]")));
        }
        if !(run.t_first > 0.0) {
            return Err(CliError::Config(format!("run.t_first must be > 0 (got {})", run.t_first)));
        }
        let d = &self.diagnostics;
        for (name, v) in [("delta", d.delta), ("k", d.k), ("eps", d.eps)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("diagnostics.{name} must be > 0 (got {v})")));
            }
        }
        if let Some([lo, hi]) = d.fit_window {
            if !(lo > 0.0 && hi > lo) {
                return Err(CliError::Config(format!("diagnostics.fit_window must satisfy 0 < lo < hi (got [{lo}, {hi}])")));
            }
        }
        self.model()?;
        self.stepper_config(Vec::new())?.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?)
    }

    pub fn bsp_params(&self) -> Option<BspParams> {
        self.bsp.as_ref().map(|b| {
            let chat = ChatKernel { c0: b.chat.c0, a: b.chat.a, kms_beta: b.chat.kms_beta };
            let mut p = BspParams::box_3d(b.beta_temp, chat);
            if let Some(a) = b.alpha_f {
                p.alpha_f = a;
            }
            if let Some(f0) = b.f0 {
                p.f0 = f0;
            }
            p
        })
    }

    pub fn kingman_params(&self) -> Option<KingmanParams> {
        self.kingman.as_ref().map(|k| KingmanParams { beta_mut: k.beta_mut, alpha_u: k.alpha_u })
    }

    pub fn model(&self) -> CliResult<Model> {
        let grid = self.grid()?;
        Ok(match self.model {
            ModelKind::Kingman => Model::Kingman(Kingman::new(grid, self.kingman_params().unwrap())?),
            ModelKind::Emv => {
                let e = self.emv.as_ref().unwrap();
                Model::Emv(Emv::new(grid, EmvParams { eta: e.eta, sigma: e.sigma })?)
            }
            ModelKind::Bsp => Model::Bsp(Bsp::new(grid, self.bsp_params().unwrap())?),
        })
    }

    /// Mass argument for stationary targets and theory constants.
    pub fn total_mass(&self) -> f64 {
        self.initial.mass
    }

    /// Initial condition scaled so that the model's conserved mass equals `initial.mass`.
    pub fn initial_condition(&self, model: &Model) -> CliResult<(InitialCondition, MeasureWithAtom)> {
        let grid = model_grid(model);
        let i = &self.initial;
        let ic = InitialCondition::new(grid, i.alpha0, i.mass, i.decay)?;
        if let Model::Emv(emv) = model {
            let conserved = emv.conserved_mass(&ic.density(grid))?;
            let ic = InitialCondition::new(grid, i.alpha0, i.mass * i.mass / conserved, i.decay)?;
            let p0 = ic.density(grid);
            return Ok((ic, p0));
        }
        let p0 = ic.density(grid);
        Ok((ic, p0))
    }

    pub fn stepper_config(&self, checkpoint_times: Vec<f64>) -> CliResult<StepperConfig> {
        let s = &self.stepper;
        let cfg = StepperConfig {
            dt_init: s.dt_init,
            dt_max: s.dt_max,
            rtol: s.rtol,
            atol: s.atol,
            blowup_cap: s.blowup_cap,
            checkpoint_times,
        };
        Ok(cfg)
    }

    /// Copy of this config with one sweepable parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> CliResult<Self> {
        let mut cfg = self.clone();
        match name {
            "alpha0" => cfg.initial.alpha0 = value,
            "total_mass" => cfg.initial.mass = value,
            "beta_mut" => match cfg.kingman.as_mut() {
                Some(k) => k.beta_mut = value,
                None => return Err(CliError::Config("beta_mut can only be swept for the kingman model".into())),
            },
            "eta" => match cfg.emv.as_mut() {
                Some(e) => e.eta = value,
                None => return Err(CliError::Config("eta can only be swept for the emv model".into())),
            },
            other => {
                return Err(CliError::Config(format!(
                    "parameter {other:?} is not sweepable (choose from {})",
                    SWEEPABLE.join(", ")
                )))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn model_grid(model: &Model) -> &Grid {
    use condensate_core::CondensationModel;
    model.grid()
}
