//! Whole-network forward pass, Gaussian NLL loss, and exact BPTT.

use serde::{Deserialize, Serialize};

use super::lstm::{layer_backward, layer_forward, sigmoid, LayerCache};
use super::{NetworkConfig, NetworkParameters};
use crate::error::{Error, Result};

/// Per-timestep Gaussian forecast from one network or an aggregated
/// ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticForecast {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl ProbabilisticForecast {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Numerically stable softplus, ln(1 + e^x).
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Everything the backward pass needs from a forward run.
pub struct ForwardCache {
    pub(crate) layer_caches: Vec<LayerCache>,
    /// Head pre-activations, T x 2 row-major (mean channel first).
    pub(crate) head_z: Vec<f64>,
    pub forecast: ProbabilisticForecast,
    pub(crate) steps: usize,
}

/// Runs the stacked layers and head over `sequence`, keeping activations.
pub fn forward_cached(
    params: &NetworkParameters,
    cfg: &NetworkConfig,
    sequence: &[f64],
) -> Result<ForwardCache> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    if sequence.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let steps = sequence.len();

    let mut layer_caches = Vec::with_capacity(params.layers.len());
    let mut current: Vec<f64> = sequence.to_vec();
    for layer in &params.layers {
        let cache = layer_forward(layer, &current, steps);
        current = cache.hidden.clone();
        layer_caches.push(cache);
    }

    let h = cfg.last_hidden();
    let mut head_z = vec![0.0; steps * 2];
    let mut mu = vec![0.0; steps];
    let mut var = vec![0.0; steps];
    for t in 0..steps {
        let hid = &current[t * h..(t + 1) * h];
        for k in 0..2 {
            let mut z = params.head_b[k];
            let row = &params.head_w[k * h..(k + 1) * h];
            for (w, v) in row.iter().zip(hid) {
                z += w * v;
            }
            head_z[t * 2 + k] = z;
        }
        mu[t] = softplus(head_z[t * 2]);
        var[t] = softplus(head_z[t * 2 + 1]).max(cfg.variance_floor);
    }

    Ok(ForwardCache {
        layer_caches,
        head_z,
        forecast: ProbabilisticForecast { mu, var },
        steps,
    })
}

/// Pure inference: any length >= 1, causal end to end.
pub fn network_forward(
    params: &NetworkParameters,
    cfg: &NetworkConfig,
    sequence: &[f64],
) -> Result<ProbabilisticForecast> {
    Ok(forward_cached(params, cfg, sequence)?.forecast)
}

/// Mean over timesteps of the Gaussian negative log likelihood against a
/// single target value repeated at every step.
pub fn nll_loss(forecast: &ProbabilisticForecast, target: f64) -> f64 {
    let t_len = forecast.len() as f64;
    forecast
        .mu
        .iter()
        .zip(&forecast.var)
        .map(|(&mu, &var)| {
            0.5 * (2.0 * std::f64::consts::PI * var).ln() + (target - mu).powi(2) / (2.0 * var)
        })
        .sum::<f64>()
        / t_len
}

/// Exact gradients of [`nll_loss`] with respect to every parameter, through
/// the softplus on both channels and the variance floor. Returns raw
/// (unclipped) gradients; training applies global-norm clipping separately.
pub fn backward(
    params: &NetworkParameters,
    cfg: &NetworkConfig,
    cache: &ForwardCache,
    target: f64,
) -> NetworkParameters {
    let steps = cache.steps;
    let t_len = steps as f64;
    let h = cfg.last_hidden();
    let mut grads = NetworkParameters::zeros(cfg);

    // Head and loss: d_hidden on the last layer's outputs.
    let last_hidden = &cache.layer_caches.last().unwrap().hidden;
    let mut d_hidden = vec![0.0; steps * h];
    for t in 0..steps {
        let mu = cache.forecast.mu[t];
        let var = cache.forecast.var[t];
        let z_mu = cache.head_z[t * 2];
        let z_var = cache.head_z[t * 2 + 1];

        let d_mu = (mu - target) / var / t_len;
        let d_var = (0.5 / var - (target - mu).powi(2) / (2.0 * var * var)) / t_len;

        let dz_mu = d_mu * sigmoid(z_mu);
        // The floor zeroes the variance path when it is active.
        let dz_var = if softplus(z_var) > cfg.variance_floor {
            d_var * sigmoid(z_var)
        } else {
            0.0
        };

        let hid = &last_hidden[t * h..(t + 1) * h];
        for (k, dz) in [dz_mu, dz_var].into_iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            grads.head_b[k] += dz;
            let gw = &mut grads.head_w[k * h..(k + 1) * h];
            for (g, v) in gw.iter_mut().zip(hid) {
                *g += dz * v;
            }
            let row = &params.head_w[k * h..(k + 1) * h];
            let dh = &mut d_hidden[t * h..(t + 1) * h];
            for (acc, w) in dh.iter_mut().zip(row) {
                *acc += dz * w;
            }
        }
    }

    // BPTT down the stack.
    let mut d_out = d_hidden;
    for idx in (0..params.layers.len()).rev() {
        d_out = layer_backward(
            &params.layers[idx],
            &cache.layer_caches[idx],
            &d_out,
            &mut grads.layers[idx],
        );
    }
    grads
}
