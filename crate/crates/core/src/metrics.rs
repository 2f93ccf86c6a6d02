//! Response-time and uncertainty metrics.
//!
//! The settling metric is a modified t90: the earliest sample time after
//! which the series stays within 10% of the equilibrium-to-baseline span for
//! every later sample. Requiring the series to *remain* in band handles
//! overshoot and prediction instability, which is what distinguishes it from
//! the classic 90%-rise definition.

use serde::{Deserialize, Serialize};

use crate::curve::ResponseCurve;
use crate::datahub::MinMaxStats;
use crate::ensemble::{train_ensemble, AggregatedForecast, Forecaster, TrainedEnsemble};
use crate::error::{Error, Result};
use crate::exec;
use crate::neural::{NetworkConfig, TrainConfig, TrainExample};

/// Fraction of the equilibrium-to-baseline span defining the settling band.
pub const SETTLING_BAND_FRACTION: f64 = 0.10;
/// Shared-edge histogram resolution for evaluation reports.
const HISTOGRAM_BINS: usize = 20;

/// Thresholds for the dynamic "return the result now" rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingPolicy {
    /// Upper bound on the aggregated variance (normalized response units).
    pub variance_threshold: f64,
    /// Number of trailing samples over which the mean must be stable.
    pub stability_window: usize,
    /// Maximum allowed max-min spread of the mean over the window.
    pub stability_band: f64,
    /// Tests still unstable past this time are declared invalid and rerun.
    pub max_cutoff_s: f64,
}

impl StoppingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.variance_threshold > 0.0
            && self.stability_window > 0
            && self.stability_band > 0.0
            && self.max_cutoff_s > 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidInput("stopping policy fields must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum StoppingOutcome {
    Returned { value: f64, t_s: f64 },
    Invalid,
}

/// Earliest sample time t such that |series(t') − equilibrium| stays within
/// the band for every t' >= t. The band is
/// [`SETTLING_BAND_FRACTION`] · |equilibrium − baseline|, which makes the
/// metric invariant under joint positive affine transforms.
pub fn settling_time(
    series: &[f64],
    times_s: &[f64],
    equilibrium: f64,
    baseline: f64,
) -> Result<f64> {
    if series.is_empty() || series.len() != times_s.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples vs {} timestamps",
            series.len(),
            times_s.len()
        )));
    }
    let band = SETTLING_BAND_FRACTION * (equilibrium - baseline).abs();
    if !(band > 0.0) {
        return Err(Error::InvalidInput(
            "equilibrium and baseline must differ".into(),
        ));
    }
    let last_violation = series
        .iter()
        .rposition(|&x| (x - equilibrium).abs() > band);
    match last_violation {
        None => Ok(times_s[0]),
        Some(i) if i + 1 == series.len() => Err(Error::NotSettled),
        Some(i) => Ok(times_s[i + 1]),
    }
}

/// [`settling_time`] with equilibrium defaulted to the final sample and
/// baseline to the first, the convention for baseline-normalized curves.
pub fn settling_time_auto(series: &[f64], times_s: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    settling_time(series, times_s, *series.last().unwrap(), series[0])
}

/// Ratio of experimental to model-prediction settling time.
pub fn factor_of_improvement(t90_experimental_s: f64, t90_model_s: f64) -> Result<f64> {
    if t90_experimental_s > 0.0 && t90_model_s > 0.0 {
        Ok(t90_experimental_s / t90_model_s)
    } else {
        Err(Error::Undefined("factor of improvement needs positive settling times"))
    }
}

/// Time-averaged predicted variance divided by the curve's equilibrium
/// response; a proxy inversely related to S/N.
pub fn normalized_variance(forecast: &AggregatedForecast, equilibrium_response: f64) -> Result<f64> {
    if equilibrium_response == 0.0 {
        return Err(Error::Undefined("normalized variance needs a nonzero equilibrium"));
    }
    if forecast.is_empty() {
        return Err(Error::InvalidInput("empty forecast".into()));
    }
    let mean_var = forecast.var_star.iter().sum::<f64>() / forecast.len() as f64;
    Ok(mean_var / equilibrium_response)
}

/// Returns at the first time where the variance is below threshold and the
/// mean has been stable over the trailing window; never before the window is
/// full and never after `max_cutoff_s`.
pub fn stopping_decision(
    times_s: &[f64],
    forecast: &AggregatedForecast,
    policy: &StoppingPolicy,
) -> StoppingOutcome {
    let n = forecast.len().min(times_s.len());
    let w = policy.stability_window;
    for i in 0..n {
        if times_s[i] > policy.max_cutoff_s {
            break;
        }
        if i + 1 < w {
            continue;
        }
        if forecast.var_star[i] > policy.variance_threshold {
            continue;
        }
        let window = &forecast.mu_star[i + 1 - w..=i];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in window {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo <= policy.stability_band {
            return StoppingOutcome::Returned {
                value: forecast.mu_star[i],
                t_s: times_s[i],
            };
        }
    }
    StoppingOutcome::Invalid
}

/// Derives the default per-corpus policy: variance threshold and stability
/// band at the 25th percentile of final-quarter values observed on the
/// validation split.
pub fn derive_policy(
    validation: &[(&[f64], AggregatedForecast)],
    stability_window: usize,
    max_cutoff_s: f64,
) -> Result<StoppingPolicy> {
    if validation.is_empty() {
        return Err(Error::InvalidInput("no validation forecasts".into()));
    }
    let mut vars = Vec::new();
    let mut spreads = Vec::new();
    for (_, forecast) in validation {
        let n = forecast.len();
        let start = n - n / 4;
        for i in start.max(stability_window.saturating_sub(1))..n {
            vars.push(forecast.var_star[i]);
            if i + 1 >= stability_window {
                let window = &forecast.mu_star[i + 1 - stability_window..=i];
                let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                spreads.push(hi - lo);
            }
        }
    }
    Ok(StoppingPolicy {
        variance_threshold: percentile(&mut vars, 0.25).max(f64::MIN_POSITIVE),
        stability_window,
        stability_band: percentile(&mut spreads, 0.25).max(f64::MIN_POSITIVE),
        max_cutoff_s,
    })
}

fn percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] * (1.0 - frac) + values[hi] * frac
}

/// Per-curve evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub id: String,
    pub t90_experimental_s: Option<f64>,
    pub t90_model_s: Option<f64>,
    pub factor_of_improvement: Option<f64>,
    pub normalized_variance: Option<f64>,
    pub stopping: StoppingOutcome,
}

/// One shared-edge histogram bin over both settling-time distributions.
/// `mean_normalized_variance` averages over curves whose model settling time
/// falls in the bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T90Bin {
    pub lo_s: f64,
    pub hi_s: f64,
    pub count_experimental: usize,
    pub count_model: usize,
    pub mean_normalized_variance: Option<f64>,
}

/// Quartiles, 1.5-IQR whiskers, and outliers of the FOI distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        let q1 = percentile(&mut sorted, 0.25);
        let median = percentile(&mut sorted, 0.5);
        let q3 = percentile(&mut sorted, 0.75);
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inliers: Vec<f64> = sorted
            .iter()
            .copied()
            .filter(|v| (fence_lo..=fence_hi).contains(v))
            .collect();
        let whisker_lo = inliers.first().copied().unwrap_or(q1);
        let whisker_hi = inliers.last().copied().unwrap_or(q3);
        let outliers = sorted
            .into_iter()
            .filter(|v| !(fence_lo..=fence_hi).contains(v))
            .collect();
        Some(BoxStats {
            q1,
            median,
            q3,
            whisker_lo,
            whisker_hi,
            outliers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub n_curves: usize,
    pub n_defined_foi: usize,
    pub n_undefined_foi: usize,
    pub n_invalid_stopping: usize,
    pub mean_foi: Option<f64>,
    pub median_foi: Option<f64>,
    pub histogram: Vec<T90Bin>,
    pub foi_box: Option<BoxStats>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Scores a forecaster over a set of (denormalized) curves.
///
/// Per curve: experimental t90 on the measured series; model t90 on the
/// denormalized mean trajectory with the equilibrium fixed to the curve's
/// final measured value; FOI; normalized variance; and the stopping outcome.
/// Records come back sorted by curve id and the summary reduces over them in
/// that order.
pub fn evaluate_dataset<F: Forecaster>(
    forecaster: &F,
    stats: &MinMaxStats,
    curves: &[&ResponseCurve],
    policy: &StoppingPolicy,
) -> Result<(Vec<EvaluationRecord>, EvaluationSummary)> {
    policy.validate()?;
    if curves.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let results = exec::map_slice(curves, |curve| -> Result<EvaluationRecord> {
        let normalized = stats.forward(&curve.response);
        let forecast = forecaster.forecast_normalized(&normalized)?;
        if forecast.len() != curve.len() {
            return Err(Error::ShapeMismatch(format!(
                "forecast length {} vs curve length {}",
                forecast.len(),
                curve.len()
            )));
        }
        let mu_denorm = stats.inverse(&forecast.mu_star);

        let equilibrium = curve.final_response();
        let baseline = curve.response[0];
        let t90_exp = settling_time(&curve.response, &curve.times_s, equilibrium, baseline).ok();
        let t90_model = settling_time(&mu_denorm, &curve.times_s, equilibrium, baseline).ok();
        let foi = match (t90_exp, t90_model) {
            (Some(e), Some(m)) => factor_of_improvement(e, m).ok(),
            _ => None,
        };
        let norm_var = normalized_variance(&forecast, equilibrium).ok();
        let stopping = stopping_decision(&curve.times_s, &forecast, policy);

        Ok(EvaluationRecord {
            id: curve.meta.id.clone(),
            t90_experimental_s: t90_exp,
            t90_model_s: t90_model,
            factor_of_improvement: foi,
            normalized_variance: norm_var,
            stopping,
        })
    });

    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let summary = summarize(&records);
    Ok((records, summary))
}

fn summarize(records: &[EvaluationRecord]) -> EvaluationSummary {
    let fois: Vec<f64> = records
        .iter()
        .filter_map(|r| r.factor_of_improvement)
        .collect();
    let n_invalid = records
        .iter()
        .filter(|r| matches!(r.stopping, StoppingOutcome::Invalid))
        .count();

    let mut sorted_fois = fois.clone();
    let median_foi = if sorted_fois.is_empty() {
        None
    } else {
        Some(percentile(&mut sorted_fois, 0.5))
    };

    EvaluationSummary {
        n_curves: records.len(),
        n_defined_foi: fois.len(),
        n_undefined_foi: records.len() - fois.len(),
        n_invalid_stopping: n_invalid,
        mean_foi: (!fois.is_empty()).then(|| mean(&fois)),
        median_foi,
        histogram: build_histogram(records),
        foi_box: BoxStats::from_values(&fois),
    }
}

fn build_histogram(records: &[EvaluationRecord]) -> Vec<T90Bin> {
    let exp: Vec<f64> = records.iter().filter_map(|r| r.t90_experimental_s).collect();
    let model: Vec<f64> = records.iter().filter_map(|r| r.t90_model_s).collect();
    let max_t = exp
        .iter()
        .chain(&model)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_t.is_finite() || max_t <= 0.0 {
        return Vec::new();
    }
    let width = max_t / HISTOGRAM_BINS as f64;
    let bin_of = |t: f64| ((t / width) as usize).min(HISTOGRAM_BINS - 1);

    let mut bins: Vec<T90Bin> = (0..HISTOGRAM_BINS)
        .map(|i| T90Bin {
            lo_s: i as f64 * width,
            hi_s: (i + 1) as f64 * width,
            count_experimental: 0,
            count_model: 0,
            mean_normalized_variance: None,
        })
        .collect();
    let mut var_sums = vec![(0.0f64, 0usize); HISTOGRAM_BINS];

    for r in records {
        if let Some(t) = r.t90_experimental_s {
            bins[bin_of(t)].count_experimental += 1;
        }
        if let Some(t) = r.t90_model_s {
            let b = bin_of(t);
            bins[b].count_model += 1;
            if let Some(v) = r.normalized_variance {
                var_sums[b].0 += v;
                var_sums[b].1 += 1;
            }
        }
    }
    for (bin, (sum, count)) in bins.iter_mut().zip(var_sums) {
        if count > 0 {
            bin.mean_normalized_variance = Some(sum / count as f64);
        }
    }
    bins
}

/// One row of the ensemble-size study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ensemble_size: usize,
    pub mean_foi: Option<f64>,
    pub median_foi: Option<f64>,
    pub defined_fraction: f64,
}

/// Everything the sweep needs besides the sizes themselves.
pub struct SweepInputs<'a> {
    pub train: &'a [TrainExample],
    pub val: &'a [TrainExample],
    pub net_cfg: &'a NetworkConfig,
    pub train_cfg: &'a TrainConfig,
    pub master_seed: u64,
    pub normalizer: &'a MinMaxStats,
    pub eval_curves: &'a [&'a ResponseCurve],
    pub policy: &'a StoppingPolicy,
}

/// Trains the largest requested ensemble once and evaluates nested member
/// prefixes, so size 5 uses the first 5 members of the full pool. Returns
/// the pool alongside the per-size rows.
pub fn ensemble_size_sweep(
    inputs: &SweepInputs,
    sizes: &[usize],
) -> Result<(TrainedEnsemble, Vec<SweepRow>)> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidInput("sweep sizes must be nonempty and positive".into()));
    }
    let max_m = *sizes.iter().max().unwrap();
    let pool = train_ensemble(
        inputs.train,
        inputs.val,
        inputs.net_cfg,
        inputs.train_cfg,
        max_m,
        inputs.master_seed,
        inputs.normalizer.clone(),
    )?;

    let mut rows = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let model = pool.model.prefix(m);
        let (_, summary) =
            evaluate_dataset(&model, inputs.normalizer, inputs.eval_curves, inputs.policy)?;
        rows.push(SweepRow {
            ensemble_size: m,
            mean_foi: summary.mean_foi,
            median_foi: summary.median_foi,
            defined_fraction: summary.n_defined_foi as f64 / summary.n_curves as f64,
        });
    }
    Ok((pool, rows))
}
