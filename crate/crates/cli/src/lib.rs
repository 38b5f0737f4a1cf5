//! Command-line front end: model fits, bootstrap adequacy tests and the
//! Monte Carlo study.

pub mod commands;
pub mod config;
pub mod data;

use std::fmt;

use clap::{Parser, Subcommand};

pub use commands::{cmd_fit, cmd_mc, cmd_test, run};
pub use config::RunConfig;
pub use data::{load_series, read_series};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Parse = 1,
    Fit = 2,
    Bootstrap = 3,
    Internal = 10,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Parse, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Internal, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pitgof::Error> for CliError {
    fn from(e: pitgof::Error) -> Self {
        use pitgof::Error::*;
        let code = match &e {
            UnreliableBootstrap { .. } => ExitCode::Bootstrap,
            Config(_) => ExitCode::Parse,
            Shape(_) | Domain(_) => ExitCode::Internal,
            NonConvergence { .. }
            | ThresholdCollapse { .. }
            | CellFloor { .. }
            | NonStationary(_)
            | InvalidModel(_)
            | DegenerateSeries(_) => ExitCode::Fit,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pitgof",
    version,
    about = "Specification tests for dynamic discrete choice models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit a model by maximum likelihood
    Fit(RunConfig),
    /// Fit a model and run the bootstrap specification tests
    Test(RunConfig),
    /// Run the Monte Carlo rejection-rate study
    Mc(RunConfig),
}

/// Formats `x` with four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(8.8), "8.800");
        assert_eq!(sig4(0.208333), "0.2083");
        assert_eq!(sig4(1234.56), "1235");
        assert_eq!(sig4(-0.05), "-0.05000");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
    }

    #[test]
    fn error_codes() {
        let e: CliError = pitgof::Error::UnreliableBootstrap {
            failed: 50,
            total: 100,
        }
        .into();
        assert_eq!(e.code, ExitCode::Bootstrap);
        let e: CliError = pitgof::Error::DegenerateSeries("x".into()).into();
        assert_eq!(e.code, ExitCode::Fit);
        assert_eq!(ExitCode::Internal as i32, 10);
    }
}
