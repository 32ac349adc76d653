//! Command-line interface for Bayesian subset selection on sparse linear
//! models: run selections on CSV data, replicate simulation grids, evaluate
//! leave-one-out prediction error, and cross-check the search against
//! exhaustive enumeration.
//!
//! Conventions: data goes to files or standard output, diagnostics to
//! standard error; every run is reproducible from its seed (a run without
//! --seed draws one and prints it); exit status is zero exactly when the run
//! completed.

mod cmd_cv;
mod cmd_oracle;
mod cmd_select;
mod cmd_simulate;
mod config;
mod dataio;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sbs",
    version,
    about = "Bayesian subset selection for sparse linear models (screen, then Gibbs)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select covariates for a CSV dataset.
    Select(cmd_select::SelectArgs),
    /// Run a simulation grid and report selection proportions.
    Simulate(cmd_simulate::SimulateArgs),
    /// Leave-one-out cross-validation over a list of screening sizes.
    Cv(cmd_cv::CvArgs),
    /// Compare the two-step search against exhaustive enumeration (p <= 22).
    OracleCheck(cmd_oracle::OracleArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(args) => cmd_select::run(args),
        Command::Simulate(args) => cmd_simulate::run(args),
        Command::Cv(args) => cmd_cv::run(args),
        Command::OracleCheck(args) => cmd_oracle::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
