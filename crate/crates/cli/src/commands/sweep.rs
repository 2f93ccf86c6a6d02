//! `equilcast sweep`: accuracy vs ensemble size on the validation split,
//! evaluating nested member prefixes of one trained pool.

use std::fs;
use std::path::PathBuf;

use clap::Parser;

use equilcast_core::datahub::{fit_normalizer, stratified_split, Split};
use equilcast_core::ensemble::examples_from_curves;
use equilcast_core::metrics::{derive_policy, ensemble_size_sweep, SweepInputs};
use equilcast_core::neural::{NetworkConfig, TrainConfig};
use equilcast_core::{Error, Result};

use crate::util::self;

#[derive(Parser)]
pub struct Args {
    /// Corpus directory with `manifest.json`.
    #[arg(long)]
    curves: PathBuf,

    /// Ensemble sizes to score; the largest is trained once and the rest
    /// reuse its leading members.
    #[arg(long, value_delimiter = ',', default_value = "1,5,15,25")]
    sizes: Vec<usize>,

    /// Master seed (split + member training).
    #[arg(long)]
    seed: u64,

    #[arg(long, value_delimiter = ',', default_value = "16,64")]
    layers: Vec<usize>,

    #[arg(long, default_value_t = 40)]
    epochs: usize,

    #[arg(long, default_value_t = 16)]
    batch: usize,

    #[arg(long, default_value_t = 1e-2)]
    lr: f64,

    /// Output directory for `sweep.csv`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.curves, "--curves")?;
    let mut corpus = util::load_corpus_with_splits(&args.curves, None)?;
    if corpus.splits.is_empty() {
        corpus.splits = stratified_split(&corpus, (3, 1, 1), args.seed)?;
    }
    let normalizer = fit_normalizer(&corpus)?;
    let sequence_length = corpus.curves[0].len();

    let net_cfg = NetworkConfig {
        lstm_layer_sizes: args.layers.clone(),
        input_dim: 1,
        sequence_length,
        variance_floor: 1e-6,
    };
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        ..TrainConfig::default()
    };

    let train = examples_from_curves(&corpus.split_curves(Split::Train), &normalizer, sequence_length)?;
    let val_curves = corpus.split_curves(Split::Validation);
    if val_curves.is_empty() {
        return Err(Error::InvalidInput("validation split is empty".into()));
    }
    let val = examples_from_curves(&val_curves, &normalizer, sequence_length)?;

    // A permissive parking policy; the sweep metric is FOI, and the real
    // policy is derived from the final pool's validation forecasts below.
    let max_duration = val_curves
        .iter()
        .map(|c| *c.times_s.last().unwrap())
        .fold(0.0f64, f64::max);

    let inputs = SweepInputs {
        train: &train,
        val: &val,
        net_cfg: &net_cfg,
        train_cfg: &train_cfg,
        master_seed: args.seed,
        normalizer: &normalizer,
        eval_curves: &val_curves,
        policy: &equilcast_core::metrics::StoppingPolicy {
            variance_threshold: 1e-3,
            stability_window: 10,
            stability_band: 0.05,
            max_cutoff_s: max_duration,
        },
    };
    let (pool, rows) = ensemble_size_sweep(&inputs, &args.sizes)?;

    fs::create_dir_all(&args.out)?;
    let mut csv = String::from("ensemble_size,mean_foi,median_foi,defined_fraction\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.ensemble_size,
            row.mean_foi.map(|v| v.to_string()).unwrap_or_default(),
            row.median_foi.map(|v| v.to_string()).unwrap_or_default(),
            row.defined_fraction
        ));
    }
    fs::write(args.out.join("sweep.csv"), csv)?;

    // Also persist a policy derived from the full pool, handy for later
    // `predict`/`evaluate` runs on this corpus.
    let forecasts = val_curves
        .iter()
        .map(|curve| -> Result<_> {
            let normalized = normalizer.forward(&curve.response);
            Ok((curve.times_s.as_slice(), pool.model.predict_stream(&normalized)?))
        })
        .collect::<Result<Vec<(&[f64], _)>>>()?;
    if let Ok(policy) = derive_policy(&forecasts, 10, max_duration) {
        fs::write(args.out.join("policy.json"), serde_json::to_vec_pretty(&policy)?)?;
    }

    for row in &rows {
        println!(
            "sweep: M={:<3} mean FOI {:?} median FOI {:?}",
            row.ensemble_size, row.mean_foi, row.median_foi
        );
    }
    Ok(())
}
