//! `equilcast evaluate`: score a trained ensemble over a corpus split and
//! emit the report plus plot-ready CSVs.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use equilcast_core::datahub::Split;
use equilcast_core::ensemble::{load_ensemble, AggregatedForecast, EnsembleModel};
use equilcast_core::metrics::{derive_policy, evaluate_dataset, StoppingPolicy};
use equilcast_core::{Error, ResponseCurve, Result};

use crate::plots;
use crate::util;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Validation,
    Test,
}

#[derive(Parser)]
pub struct Args {
    /// Trained ensemble directory.
    #[arg(long)]
    model: PathBuf,

    /// Corpus directory with `manifest.json`.
    #[arg(long)]
    curves: PathBuf,

    /// Which split to score (split labels come from the corpus manifest or
    /// the model's `splits.json`).
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,

    /// Stopping policy JSON; without it thresholds are derived from the
    /// validation split (25th percentile of final-quarter values).
    #[arg(long)]
    policy: Option<PathBuf>,

    /// Trailing stability window (samples) for a derived policy.
    #[arg(long, default_value_t = 10)]
    stability_window: usize,

    /// Output report directory.
    #[arg(long)]
    out: PathBuf,
}

fn resolve_policy(
    args: &Args,
    model: &EnsembleModel,
    validation: &[&ResponseCurve],
    max_duration_s: f64,
) -> Result<StoppingPolicy> {
    if let Some(path) = &args.policy {
        let policy: StoppingPolicy = serde_json::from_slice(&fs::read(path)?)?;
        policy.validate()?;
        return Ok(policy);
    }
    if validation.is_empty() {
        return Err(Error::InvalidInput(
            "no --policy given and no validation split to derive one from".into(),
        ));
    }
    let forecasts: Vec<(&[f64], AggregatedForecast)> = validation
        .iter()
        .map(|curve| -> Result<(&[f64], AggregatedForecast)> {
            let normalized = model.normalizer.forward(&curve.response);
            Ok((curve.times_s.as_slice(), model.predict_stream(&normalized)?))
        })
        .collect::<Result<Vec<_>>>()?;
    derive_policy(&forecasts, args.stability_window, max_duration_s)
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.curves, "--curves")?;
    let model = load_ensemble(&args.model)?;
    let corpus = util::load_corpus_with_splits(&args.curves, Some(&args.model))?;

    let selected: Vec<&ResponseCurve> = match args.split {
        SplitArg::All => corpus.curves.iter().collect(),
        SplitArg::Train => corpus.split_curves(Split::Train),
        SplitArg::Validation => corpus.split_curves(Split::Validation),
        SplitArg::Test => corpus.split_curves(Split::Test),
    };
    if selected.is_empty() {
        return Err(Error::InvalidInput(
            "selected split is empty; is a split assigned in the manifest or splits.json?".into(),
        ));
    }

    let max_duration = selected
        .iter()
        .map(|c| *c.times_s.last().unwrap())
        .fold(0.0f64, f64::max);
    let validation = corpus.split_curves(Split::Validation);
    let policy = resolve_policy(&args, &model, &validation, max_duration)?;

    let (records, summary) = evaluate_dataset(&model, &model.normalizer, &selected, &policy)?;

    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("report.json"),
        serde_json::to_vec_pretty(&serde_json::json!({
            "policy": policy,
            "records": records,
            "summary": summary,
        }))?,
    )?;
    plots::write_t90_hist(&args.out.join("t90_hist.csv"), &summary)?;
    plots::write_foi_box(&args.out.join("foi_box.csv"), &summary)?;

    let traces: Vec<(&ResponseCurve, AggregatedForecast)> = selected
        .iter()
        .map(|curve| -> Result<(&ResponseCurve, AggregatedForecast)> {
            let normalized = model.normalizer.forward(&curve.response);
            Ok((*curve, model.predict_stream(&normalized)?))
        })
        .collect::<Result<Vec<_>>>()?;
    plots::write_forecast_traces(&args.out.join("forecast_traces.csv"), &traces, &model.normalizer)?;

    println!(
        "evaluate: {} curves; FOI mean {:?} median {:?}; defined {}/{}; invalid {} -> {}",
        summary.n_curves,
        summary.mean_foi,
        summary.median_foi,
        summary.n_defined_foi,
        summary.n_curves,
        summary.n_invalid_stopping,
        args.out.display()
    );
    Ok(())
}
