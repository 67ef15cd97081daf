#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod sweep;
mod verify;

use config::RunConfig;
use error::{CliError, CliResult};

/// Simulate condensing mean-field models and check their Gamma-shaped condensate profile.
#[derive(Parser)]
#[command(name = "condensate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run to `t_end` and write time series, snapshots, profile and fit report.
    Simulate(Common),
    /// Write the stationary limit and theory constants.
    Stationary(Common),
    /// Refit the final snapshot of an earlier simulate run.
    Fit(Common),
    /// Run the invariant and oracle checks for the configured model.
    Verify(Common),
    /// Repeat simulate over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of alpha0, beta_mut, eta, total_mass.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("CONDENSATE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("CONDENSATE_THREADS must be a positive integer (got {raw:?})")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn load(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, out) = load(&common)?;
            match commands::simulate(&cfg, &out)? {
                Some(fit) => println!(
                    "t = {}: beta_hat = {:.4} (theory {:.4}), gamma_hat = {:.4} (theory {:.4}), condensate {:.4} (theory {:.4})",
                    fit.t, fit.beta_hat, fit.beta_theory, fit.gamma_hat, fit.gamma_theory, fit.condensate_estimate, fit.rho_theory
                ),
                None => println!("wrote {}", out.display()),
            }
        }
        Command::Stationary(common) => {
            let (cfg, out) = load(&common)?;
            let r = commands::stationary(&cfg, &out)?;
            println!(
                "{}: criterion {:.6} (critical mass {:.6}), condenses: {}",
                r.model, r.criterion.value, r.criterion.critical_mass, r.criterion.condenses
            );
            if let Some(tc) = r.theory {
                println!("rho = {:.6}, gamma = {:.6}, beta = {}", tc.rho, tc.gamma, tc.beta_shape);
            }
        }
        Command::Fit(common) => {
            let (cfg, out) = load(&common)?;
            let fit = commands::fit(&cfg, &out)?;
            println!("beta_hat = {:.4}, gamma_hat = {:.4}, c_hat = {:.4}", fit.beta_hat, fit.gamma_hat, fit.c_hat);
        }
        Command::Verify(common) => {
            let (cfg, out) = load(&common)?;
            verify::verify(&cfg, &out)?;
        }
        Command::Sweep { common, param, values } => {
            let (cfg, out) = load(&common)?;
            let values = sweep::parse_values(&values)?;
            for row in sweep::sweep(&cfg, &out, &param, &values)? {
                let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{param} = {}: beta_hat {}, gamma_hat {}, rho_estimate {}",
                    row.value,
                    show(row.beta_hat),
                    show(row.gamma_hat),
                    show(row.rho_estimate)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
