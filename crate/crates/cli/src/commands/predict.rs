//! `equilcast predict`: stream per-timestep forecasts for one curve and emit
//! the stopping decision the policy would have made live.

use std::path::PathBuf;

use clap::Parser;

use equilcast_core::curve::CurveMeta;
use equilcast_core::datahub::read_curve_csv;
use equilcast_core::ensemble::load_ensemble;
use equilcast_core::metrics::{stopping_decision, StoppingOutcome, StoppingPolicy};
use equilcast_core::{Result};

use crate::util;

#[derive(Parser)]
pub struct Args {
    /// Trained ensemble directory.
    #[arg(long)]
    model: PathBuf,

    /// Curve CSV (`t_seconds,response`).
    #[arg(long)]
    curve: PathBuf,

    /// Stopping policy JSON; without it only forecasts are printed.
    #[arg(long)]
    policy: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    util::require_file(&args.curve, "--curve")?;
    let model = load_ensemble(&args.model)?;
    let policy: Option<StoppingPolicy> = match &args.policy {
        Some(path) => {
            let p: StoppingPolicy = serde_json::from_slice(&std::fs::read(path)?)?;
            p.validate()?;
            Some(p)
        }
        None => None,
    };

    let id = args
        .curve
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("curve")
        .to_string();
    let curve = read_curve_csv(&args.curve, CurveMeta::experimental(id, 0.0))?;

    let normalized = model.normalizer.forward(&curve.response);
    // One causal pass gives the same per-step outputs as feeding prefixes of
    // every length.
    let forecast = model.predict_stream(&normalized)?;

    let decision = policy
        .as_ref()
        .map(|p| stopping_decision(&curve.times_s, &forecast, p));
    let t_returned = match decision {
        Some(StoppingOutcome::Returned { t_s, .. }) => Some(t_s),
        _ => None,
    };

    for i in 0..forecast.len() {
        let state = match t_returned {
            Some(t) if curve.times_s[i] >= t => "returned",
            _ => "pending",
        };
        println!(
            "{}",
            serde_json::json!({
                "t_s": curve.times_s[i],
                "mu": forecast.mu_star[i],
                "var": forecast.var_star[i],
                "response": model.normalizer.inverse_value(forecast.mu_star[i]),
                "decision": if policy.is_some() { state } else { "n/a" },
                "t_returned_s": t_returned,
            })
        );
    }

    let final_line = match decision {
        Some(StoppingOutcome::Returned { value, t_s }) => serde_json::json!({
            "final": true,
            "decision": "returned",
            "value": value,
            "response": model.normalizer.inverse_value(value),
            "t_returned_s": t_s,
        }),
        Some(StoppingOutcome::Invalid) => serde_json::json!({
            "final": true,
            "decision": "invalid",
        }),
        None => serde_json::json!({
            "final": true,
            "decision": "n/a",
            "response": model
                .normalizer
                .inverse_value(*forecast.mu_star.last().unwrap()),
        }),
    };
    println!("{final_line}");
    Ok(())
}
