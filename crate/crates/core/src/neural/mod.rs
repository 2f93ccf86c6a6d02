//! From-scratch stacked LSTM sequence regressor with a probabilistic head.
//!
//! Each network maps a univariate sequence to a per-timestep Gaussian
//! (mean, variance) pair: stacked LSTM layers returning full sequences, a
//! shared 2-node dense head applied at every step, and softplus on both
//! output channels so predictions stay positive. Training minimizes the
//! Gaussian negative log likelihood with exact backpropagation through time
//! and Adam. All internal arithmetic is f64; serialized weights are f32.

mod adam;
mod lstm;
mod model_io;
mod net;
mod train;

pub use adam::{adam_step, clip_global_norm, AdamMoments};
pub use lstm::LstmLayer;
pub use model_io::{load_model, save_model};
pub use net::{
    backward, forward_cached, network_forward, nll_loss, softplus, ForwardCache,
    ProbabilisticForecast,
};
pub use train::{batch_gradients, train_base_learner, EpochStats, TrainExample, TrainingLog};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Hidden width of each stacked LSTM layer, input to output.
    pub lstm_layer_sizes: Vec<usize>,
    /// Width of each input timestep (univariate series).
    pub input_dim: usize,
    /// Training sequence length; streaming inference accepts any length.
    pub sequence_length: usize,
    /// Lower bound applied to the predicted variance channel.
    pub variance_floor: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            lstm_layer_sizes: vec![50, 500],
            input_dim: 1,
            sequence_length: 250,
            variance_floor: 1e-6,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lstm_layer_sizes.is_empty() || self.lstm_layer_sizes.iter().any(|&h| h == 0) {
            return Err(Error::InvalidInput(
                "at least one LSTM layer with nonzero width is required".into(),
            ));
        }
        if self.input_dim != 1 {
            return Err(Error::InvalidInput("input_dim must be 1".into()));
        }
        if self.sequence_length < 2 {
            return Err(Error::InvalidInput("sequence_length must be >= 2".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidInput("variance_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn last_hidden(&self) -> usize {
        *self.lstm_layer_sizes.last().unwrap()
    }
}

/// Optimizer and schedule hyperparameters for one base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub gradient_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            gradient_clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.adam_epsilon > 0.0
            && self.gradient_clip_norm > 0.0;
        let betas = (0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2);
        if positive && betas {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "train config fields must be positive with betas in (0, 1)".into(),
            ))
        }
    }
}

/// All trainable weights of a stacked LSTM plus the 2-node dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub layers: Vec<LstmLayer>,
    /// Dense head, row-major 2 x last_hidden; row 0 is the mean channel.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl NetworkParameters {
    /// Zero-valued parameters with shapes drawn from the config.
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let mut layers = Vec::with_capacity(cfg.lstm_layer_sizes.len());
        let mut input = cfg.input_dim;
        for &hidden in &cfg.lstm_layer_sizes {
            layers.push(LstmLayer::zeros(input, hidden));
            input = hidden;
        }
        NetworkParameters {
            layers,
            head_w: vec![0.0; 2 * cfg.last_hidden()],
            head_b: vec![0.0; 2],
        }
    }

    /// Seeded fan-in-scaled uniform initialization with the forget-gate bias
    /// set to 1.
    pub fn init(cfg: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = Self::zeros(cfg);
        for layer in &mut params.layers {
            let s_in = 1.0 / (layer.input_size as f64).sqrt();
            for w in &mut layer.w_input {
                *w = rng.random_range(-s_in..s_in);
            }
            let s_rec = 1.0 / (layer.hidden_size as f64).sqrt();
            for w in &mut layer.w_recurrent {
                *w = rng.random_range(-s_rec..s_rec);
            }
            let h = layer.hidden_size;
            for b in &mut layer.bias[h..2 * h] {
                *b = 1.0;
            }
        }
        let s_head = 1.0 / (cfg.last_hidden() as f64).sqrt();
        for w in &mut params.head_w {
            *w = rng.random_range(-s_head..s_head);
        }
        params
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &self.layers {
            v.push(layer.w_input.as_slice());
            v.push(layer.w_recurrent.as_slice());
            v.push(layer.bias.as_slice());
        }
        v.push(self.head_w.as_slice());
        v.push(self.head_b.as_slice());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &mut self.layers {
            v.push(layer.w_input.as_mut_slice());
            v.push(layer.w_recurrent.as_mut_slice());
            v.push(layer.bias.as_mut_slice());
        }
        v.push(self.head_w.as_mut_slice());
        v.push(self.head_b.as_mut_slice());
        v
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks tensor shapes against a config.
    pub fn matches(&self, cfg: &NetworkConfig) -> bool {
        if self.layers.len() != cfg.lstm_layer_sizes.len() {
            return false;
        }
        let mut input = cfg.input_dim;
        for (layer, &hidden) in self.layers.iter().zip(&cfg.lstm_layer_sizes) {
            if layer.input_size != input
                || layer.hidden_size != hidden
                || layer.w_input.len() != 4 * hidden * input
                || layer.w_recurrent.len() != 4 * hidden * hidden
                || layer.bias.len() != 4 * hidden
            {
                return false;
            }
            input = hidden;
        }
        self.head_w.len() == 2 * cfg.last_hidden() && self.head_b.len() == 2
    }
}
