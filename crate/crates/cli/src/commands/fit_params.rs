//! `equilcast fit-params`: fit the six pore-model parameters to every curve
//! in a corpus and model the fitted sets with a multivariate Gaussian.

use std::fs;
use std::path::PathBuf;

use clap::Parser;

use equilcast_core::datahub::load_corpus;
use equilcast_core::simkit::{
    fit_param_distribution, fit_params_to_curve, ExperimentConditions, FitOptions,
    SimulationParameters, DEFAULT_FILM_THICKNESS_UM,
};
use equilcast_core::{exec, Result};

use crate::util;

#[derive(Parser)]
pub struct Args {
    /// Corpus directory with `manifest.json`.
    #[arg(long)]
    curves: PathBuf,

    /// Output path for the distribution JSON.
    #[arg(long)]
    out: PathBuf,

    /// Film thickness in µm (fixed by the experiment).
    #[arg(long, default_value_t = DEFAULT_FILM_THICKNESS_UM)]
    film_um: f64,

    /// Seed for the fit restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Random restarts per curve.
    #[arg(long, default_value_t = 5)]
    restarts: usize,

    /// Optimizer iterations per restart.
    #[arg(long, default_value_t = 200)]
    iterations: usize,

    /// Spatial cells in the pore solver.
    #[arg(long, default_value_t = 24)]
    grid: usize,
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.curves, "--curves")?;
    let corpus = load_corpus(&args.curves)?;

    let fits: Vec<SimulationParameters> = exec::map_slice(&corpus.curves, |curve| {
        let conditions = ExperimentConditions {
            c_bulk_mg_per_ml: curve.meta.concentration_mg_per_ml,
            film_thickness_um: args.film_um,
        };
        let opts = FitOptions {
            restarts: args.restarts,
            iterations: args.iterations,
            n_grid: args.grid,
            seed: args.seed.wrapping_add(fxhash(&curve.meta.id)),
            ..FitOptions::default()
        };
        fit_params_to_curve(curve, &conditions, &opts).map(|fit| {
            log::info!("fit {}: mse {:.3e}", curve.meta.id, fit.mse);
            fit.params
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let dist = fit_param_distribution(&fits)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, serde_json::to_vec_pretty(&dist)?)?;
    println!(
        "fit-params: fitted {} curves -> {}",
        fits.len(),
        args.out.display()
    );
    Ok(())
}

/// Small deterministic string hash so per-curve fit seeds differ.
fn fxhash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
