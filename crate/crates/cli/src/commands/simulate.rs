//! `equilcast simulate`: sample parameter sets from a fitted distribution,
//! solve the pore model for each, add measurement noise, and write a corpus.

use std::fs;
use std::path::PathBuf;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use equilcast_core::datahub::{save_corpus, Corpus};
use equilcast_core::simkit::{
    add_noise, sample_params, simulate_response_detailed, ExperimentConditions, NoiseSpec,
    ParameterDistribution, SimOptions, SimulationParameters, DEFAULT_FILM_THICKNESS_UM,
};
use equilcast_core::{exec, Error, ResponseCurve, Result};

use crate::plots::write_curves_overlay;
use crate::util::{self, Range};

#[derive(Parser)]
pub struct Args {
    /// Parameter distribution JSON (from `fit-params`).
    #[arg(long)]
    dist: PathBuf,

    /// Total number of curves, spread evenly over the concentrations.
    #[arg(long)]
    n: usize,

    /// Samples per curve.
    #[arg(long, default_value_t = 250)]
    steps: usize,

    /// Experiment length in hours.
    #[arg(long, default_value_t = 13.0)]
    duration_h: f64,

    /// S/N range sampled log-uniformly per curve; use `inf:inf` for clean
    /// curves.
    #[arg(long, default_value = "2:100")]
    snr: Range,

    /// Master seed for parameter sampling and noise.
    #[arg(long)]
    seed: u64,

    /// Concentration grid in mg/mL (defaults to the 13 assay values).
    #[arg(long, value_delimiter = ',')]
    concentrations: Option<Vec<f64>>,

    /// Spatial cells in the pore solver.
    #[arg(long, default_value_t = 24)]
    grid: usize,

    /// Film thickness in µm.
    #[arg(long, default_value_t = DEFAULT_FILM_THICKNESS_UM)]
    film_um: f64,

    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    if args.n == 0 {
        return Err(Error::InvalidInput("--n must be at least 1".into()));
    }
    let dist: ParameterDistribution = serde_json::from_slice(&fs::read(&args.dist)?)?;
    let concentrations = args
        .concentrations
        .clone()
        .unwrap_or_else(|| util::DEFAULT_CONCENTRATIONS.to_vec());
    let dt_s = args.duration_h * 3600.0 / (args.steps - 1) as f64;

    // Per-curve conditions: round-robin over the concentration grid, with
    // parameter sets sampled per concentration group for determinism.
    let mut jobs: Vec<(usize, SimulationParameters)> = Vec::with_capacity(args.n);
    for (group, &conc) in concentrations.iter().enumerate() {
        let count = args.n / concentrations.len()
            + usize::from(group < args.n % concentrations.len());
        if count == 0 {
            continue;
        }
        let conditions = ExperimentConditions {
            c_bulk_mg_per_ml: conc,
            film_thickness_um: args.film_um,
        };
        let sampled = sample_params(
            &dist,
            count,
            args.seed.wrapping_add(group as u64),
            &conditions,
        )?;
        for (j, params) in sampled.into_iter().enumerate() {
            jobs.push((group * 1_000_000 + j, params));
        }
    }
    jobs.sort_by_key(|(key, _)| *key);

    let clean: Vec<ResponseCurve> = exec::map_slice(&jobs, |(key, params)| {
        let opts = SimOptions {
            curve_id: format!("sim_c{}_{:03}", params.c_bulk, key % 1_000_000),
            ..SimOptions::default()
        };
        simulate_response_detailed(params, args.steps, dt_s, args.grid, &opts)
            .map(|(curve, audit)| {
                debug_assert!(audit.max_mass_balance_rel_error <= 1e-3);
                curve
            })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Reference amplitude for zero-signal curves: median nonzero equilibrium.
    let mut finals: Vec<f64> = clean
        .iter()
        .map(|c| c.final_response().abs())
        .filter(|a| *a > 0.0)
        .collect();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let fallback_amplitude = finals.get(finals.len() / 2).copied();

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(0x5eed_0001));
    let mut curves = Vec::with_capacity(clean.len());
    for (i, curve) in clean.into_iter().enumerate() {
        let snr = if args.snr.lo.is_infinite() {
            f64::INFINITY
        } else {
            let (lo, hi) = (args.snr.lo.ln(), args.snr.hi.ln());
            rng.random_range(lo..hi).exp()
        };
        let spec = NoiseSpec {
            snr,
            seed: args.seed.wrapping_add(0x0a0b_0000 + i as u64),
        };
        let reference = if curve.final_response().abs() > 0.0 {
            None
        } else {
            fallback_amplitude
        };
        curves.push(add_noise(&curve, &spec, reference)?);
    }

    let corpus = Corpus::from_curves(curves)?;
    save_corpus(&corpus, &args.out)?;
    let refs: Vec<&ResponseCurve> = corpus.curves.iter().collect();
    write_curves_overlay(&args.out.join("curves_overlay.csv"), &refs)?;

    println!(
        "simulate: wrote {} curves over {} concentrations to {}",
        corpus.curves.len(),
        concentrations.len(),
        args.out.display()
    );
    Ok(())
}
