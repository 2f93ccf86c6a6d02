//! `equilcast train`: split, normalize, and train the ensemble.

use std::fs;
use std::path::PathBuf;

use clap::Parser;

use equilcast_core::datahub::{fit_normalizer, stratified_split, Split};
use equilcast_core::ensemble::{examples_from_curves, save_ensemble, train_ensemble};
use equilcast_core::neural::{NetworkConfig, TrainConfig};
use equilcast_core::{Error, Result};

use crate::util::self;

#[derive(Parser)]
pub struct Args {
    /// Corpus directory with `manifest.json`.
    #[arg(long)]
    curves: PathBuf,

    /// Number of base learners.
    #[arg(long, default_value_t = 15)]
    ensemble_size: usize,

    /// Master seed: drives the 3:1:1 split (when the manifest has none) and
    /// the per-member training seeds.
    #[arg(long)]
    seed: u64,

    /// LSTM layer widths.
    #[arg(long, value_delimiter = ',', default_value = "50,500")]
    layers: Vec<usize>,

    #[arg(long, default_value_t = 200)]
    epochs: usize,

    #[arg(long, default_value_t = 16)]
    batch: usize,

    #[arg(long, default_value_t = 1e-3)]
    lr: f64,

    /// Variance floor of the probabilistic head.
    #[arg(long, default_value_t = 1e-6)]
    variance_floor: f64,

    /// Output model directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.curves, "--curves")?;
    let mut corpus = util::load_corpus_with_splits(&args.curves, None)?;
    if corpus.curves.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    if corpus.splits.is_empty() {
        corpus.splits = stratified_split(&corpus, (3, 1, 1), args.seed)?;
        log::info!("assigned a fresh 3:1:1 stratified split with seed {}", args.seed);
    }
    let normalizer = fit_normalizer(&corpus)?;

    let sequence_length = corpus.curves[0].len();
    let net_cfg = NetworkConfig {
        lstm_layer_sizes: args.layers.clone(),
        input_dim: 1,
        sequence_length,
        variance_floor: args.variance_floor,
    };
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        ..TrainConfig::default()
    };

    let train_examples =
        examples_from_curves(&corpus.split_curves(Split::Train), &normalizer, sequence_length)?;
    let val_examples = examples_from_curves(
        &corpus.split_curves(Split::Validation),
        &normalizer,
        sequence_length,
    )?;

    let trained = train_ensemble(
        &train_examples,
        &val_examples,
        &net_cfg,
        &train_cfg,
        args.ensemble_size,
        args.seed,
        normalizer,
    )?;

    fs::create_dir_all(&args.out)?;
    save_ensemble(&trained.model, &args.out)?;
    fs::write(
        args.out.join("splits.json"),
        serde_json::to_vec_pretty(&corpus.splits)?,
    )?;
    fs::write(
        args.out.join("training_log.json"),
        serde_json::to_vec_pretty(&trained.logs)?,
    )?;

    let best: Vec<f64> = trained.logs.iter().map(|l| l.best_val_nll).collect();
    println!(
        "train: {} members ({} diverged) -> {}; best val NLL {:?}",
        trained.model.members.len(),
        trained.diverged_members.len(),
        args.out.display(),
        best.iter().cloned().fold(f64::INFINITY, f64::min),
    );
    Ok(())
}
