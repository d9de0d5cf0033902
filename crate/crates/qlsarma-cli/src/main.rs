//! `qlsarma` — fit, forecast, simulate, and diagnose quantile
//! log-symmetric ARMAX time-series models from the command line.
//!
//! Exit codes: 0 success, 2 input/configuration error, 3 numeric or
//! convergence failure.

mod commands;
mod config;
mod data;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonOpts;

#[derive(Parser)]
#[command(name = "qlsarma", version, about = "Quantile log-symmetric ARMAX modelling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the model on a series file and write estimate tables.
    Fit {
        /// Comma-delimited series file with a header row.
        series: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Forecast beyond the sample end using future covariate rows.
    Forecast {
        series: PathBuf,
        /// Future covariate rows, one per forecast step.
        future: PathBuf,
        /// Realized future responses; enables accuracy metrics.
        #[arg(long)]
        actuals: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Draw a synthetic series from a configured true model.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a Monte Carlo battery over (n, τ, kernel) cells.
    Montecarlo {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit and write residual diagnostics (GCS/RQ, ACF/PACF, QQ bands).
    Residuals {
        series: PathBuf,
        /// Autocorrelation lag bound (clamped to the residual length).
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        /// Simulated samples behind each QQ envelope (min 19).
        #[arg(long, default_value_t = 99)]
        envelope_sims: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Fit { series, common } => commands::cmd_fit(common, series),
        Cmd::Forecast {
            series,
            future,
            actuals,
            common,
        } => commands::cmd_forecast(common, series, future, actuals.as_deref()),
        Cmd::Simulate { common } => commands::cmd_simulate(common),
        Cmd::Montecarlo { common } => commands::cmd_montecarlo(common),
        Cmd::Residuals {
            series,
            max_lag,
            envelope_sims,
            common,
        } => commands::cmd_residuals(common, series, *max_lag, *envelope_sims),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
