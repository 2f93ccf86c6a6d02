//! `equilcast`: predict a sensor's equilibrium response and its uncertainty
//! from a short prefix of the time series, long before the experiment ends.
//!
//! Subcommands wire the library pipeline end to end: RIFTS analysis of raw
//! reflectance spectra, physics-based corpus simulation, isotherm and
//! parameter fitting, ensemble training, streaming prediction with a dynamic
//! stopping rule, evaluation reports, and the ensemble-size sweep. Every
//! stochastic subcommand takes an explicit seed and is bit-reproducible at
//! `--jobs 1`.

mod commands;
mod plots;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "equilcast", version, about, propagate_version = true)]
struct Cli {
    /// Worker threads for parallel sections (1 = fully sequential).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw reflectance spectra into a normalized response curve.
    Rifts(commands::rifts::Args),
    /// Generate a noisy simulated corpus from a parameter distribution.
    Simulate(commands::simulate::Args),
    /// Fit pore-model parameters to each curve and model their distribution.
    FitParams(commands::fit_params::Args),
    /// Fit the equilibrium isotherm across concentrations.
    FitIsotherm(commands::fit_isotherm::Args),
    /// Train an ensemble of probabilistic forecasters.
    Train(commands::train::Args),
    /// Stream per-timestep forecasts and a stopping decision for one curve.
    Predict(commands::predict::Args),
    /// Score a trained ensemble over a corpus split.
    Evaluate(commands::evaluate::Args),
    /// Study accuracy as a function of ensemble size.
    Sweep(commands::sweep::Args),
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    equilcast_core::exec::init_thread_pool(cli.jobs);

    let result = match cli.command {
        Command::Rifts(args) => commands::rifts::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::FitParams(args) => commands::fit_params::run(args),
        Command::FitIsotherm(args) => commands::fit_isotherm::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
    };

    if let Err(err) = result {
        // One machine-parsable line on stderr, exit code 1 for domain errors.
        eprintln!(
            "{}",
            serde_json::json!({ "error": err.kind(), "message": err.to_string() })
        );
        std::process::exit(1);
    }
}
