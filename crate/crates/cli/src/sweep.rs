//! One simulate run per parameter value, executed in parallel.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use condensate_core::io::write_csv;

use crate::commands::simulate;
use crate::config::{RunConfig, SWEEPABLE};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub rho_estimate: Option<f64>,
}

pub fn parse_values(list: &str) -> CliResult<Vec<f64>> {
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("sweep value {s:?} is not a number"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    Ok(values)
}

pub fn sweep(cfg: &RunConfig, out: &Path, param: &str, values: &[f64]) -> CliResult<Vec<SweepRow>> {
    if !SWEEPABLE.contains(&param) {
        return Err(CliError::Config(format!(
            "parameter {param:?} is not sweepable (choose from {})",
            SWEEPABLE.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| cfg.with_param(param, v))
        .collect::<CliResult<Vec<_>>>()?;
    fs::create_dir_all(out)?;
    let rows = configs
        .par_iter()
        .zip(values)
        .map(|(c, &value)| {
            let dir = out.join(format!("{param}_{value}"));
            let fit = simulate(c, &dir)?;
            Ok(SweepRow {
                value,
                beta_hat: fit.map(|f| f.beta_hat),
                gamma_hat: fit.map(|f| f.gamma_hat),
                rho_estimate: fit.map(|f| f.condensate_estimate),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(&out.join("sweep.csv"), &rows)?;
    Ok(rows)
}
