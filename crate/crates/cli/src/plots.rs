//! Plot-ready CSV emission. Rendering itself is left to external tools; the
//! CLI only writes the data behind each figure.

use std::fs;
use std::path::Path;

use equilcast_core::datahub::MinMaxStats;
use equilcast_core::ensemble::AggregatedForecast;
use equilcast_core::metrics::EvaluationSummary;
use equilcast_core::{ResponseCurve, Result};

/// Long-format overlay of raw curves: one row per (curve, timestep).
pub fn write_curves_overlay(path: &Path, curves: &[&ResponseCurve]) -> Result<()> {
    let mut out = String::from("curve_id,t_seconds,response\n");
    for curve in curves {
        for (t, r) in curve.times_s.iter().zip(&curve.response) {
            out.push_str(&format!("{},{t},{r}\n", curve.meta.id));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Shared-edge settling-time histogram plus per-bin mean normalized variance.
pub fn write_t90_hist(path: &Path, summary: &EvaluationSummary) -> Result<()> {
    let mut out = String::from("bin_lo,bin_hi,count_exp,count_model,mean_norm_var\n");
    for bin in &summary.histogram {
        let mnv = bin
            .mean_normalized_variance
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{mnv}\n",
            bin.lo_s, bin.hi_s, bin.count_experimental, bin.count_model
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Box-and-whisker statistics of the factor-of-improvement distribution.
pub fn write_foi_box(path: &Path, summary: &EvaluationSummary) -> Result<()> {
    let mut out = String::from("q1,median,q3,whisker_lo,whisker_hi,outliers\n");
    if let Some(b) = &summary.foi_box {
        let outliers = b
            .outliers
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{outliers}\n",
            b.q1, b.median, b.q3, b.whisker_lo, b.whisker_hi
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-timestep forecast traces with the ±2σ band, denormalized to response
/// units alongside the measured truth.
pub fn write_forecast_traces(
    path: &Path,
    rows: &[(&ResponseCurve, AggregatedForecast)],
    stats: &MinMaxStats,
) -> Result<()> {
    let range = stats.max_response - stats.min_response;
    let mut out = String::from("curve_id,t_seconds,truth,mu,lo,hi\n");
    for (curve, forecast) in rows {
        for i in 0..curve.len() {
            let mu = stats.inverse_value(forecast.mu_star[i]);
            let sd = forecast.var_star[i].sqrt() * range;
            out.push_str(&format!(
                "{},{},{},{mu},{},{}\n",
                curve.meta.id,
                curve.times_s[i],
                curve.response[i],
                mu - 2.0 * sd,
                mu + 2.0 * sd,
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}
