//! Single-learner training loop: seeded init, per-epoch reshuffling, Adam
//! on the mean NLL of each minibatch, and best-validation snapshotting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, clip_global_norm, AdamMoments};
use super::net::{backward, forward_cached, nll_loss, network_forward};
use super::{NetworkConfig, NetworkParameters, TrainConfig};
use crate::error::{Error, Result};

/// One training example: an input sequence and the scalar target repeated at
/// every timestep by the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub sequence: Vec<f64>,
    pub target: f64,
}

impl TrainExample {
    /// The paper pipeline's convention: the target is the final element of
    /// the (normalized) input sequence.
    pub fn from_sequence(sequence: Vec<f64>) -> Self {
        let target = *sequence.last().expect("sequence must be nonempty");
        TrainExample { sequence, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

/// Record of one learner's training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub epoch_stats: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_nll: f64,
    /// Example visit order per epoch; all learners see the same set, only
    /// the order differs.
    pub example_orders: Vec<Vec<u32>>,
}

/// Mean loss and mean gradient over a batch of examples. The batch gradient
/// equals the arithmetic mean of per-example gradients.
pub fn batch_gradients(
    params: &NetworkParameters,
    cfg: &NetworkConfig,
    examples: &[&TrainExample],
) -> Result<(f64, NetworkParameters)> {
    let mut total = NetworkParameters::zeros(cfg);
    let mut loss_sum = 0.0;
    for ex in examples {
        let cache = forward_cached(params, cfg, &ex.sequence)?;
        loss_sum += nll_loss(&cache.forecast, ex.target);
        let g = backward(params, cfg, &cache, ex.target);
        for (acc, src) in total.tensors_mut().into_iter().zip(g.tensors()) {
            for (a, s) in acc.iter_mut().zip(src) {
                *a += s;
            }
        }
    }
    let n = examples.len() as f64;
    for t in total.tensors_mut() {
        for v in t.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss_sum / n, total))
}

fn mean_nll(params: &NetworkParameters, cfg: &NetworkConfig, set: &[TrainExample]) -> Result<f64> {
    let mut sum = 0.0;
    for ex in set {
        sum += nll_loss(&network_forward(params, cfg, &ex.sequence)?, ex.target);
    }
    Ok(sum / set.len() as f64)
}

/// Trains one base learner and returns the parameters from the epoch with
/// the best validation NLL alongside the training log.
pub fn train_base_learner(
    train: &[TrainExample],
    val: &[TrainExample],
    cfg: &NetworkConfig,
    tc: &TrainConfig,
) -> Result<(NetworkParameters, TrainingLog)> {
    cfg.validate()?;
    tc.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    for ex in train.iter().chain(val) {
        if ex.sequence.len() != cfg.sequence_length {
            return Err(Error::ShapeMismatch(format!(
                "sequence of length {} does not match the configured {}",
                ex.sequence.len(),
                cfg.sequence_length
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut params = NetworkParameters::init(cfg, &mut rng);
    let mut moments = AdamMoments::new(cfg);

    let mut log = TrainingLog {
        seed: tc.seed,
        epoch_stats: Vec::with_capacity(tc.epochs),
        best_epoch: 0,
        best_val_nll: f64::INFINITY,
        example_orders: Vec::with_capacity(tc.epochs),
    };
    let mut best = params.clone();
    let mut order: Vec<u32> = (0..train.len() as u32).collect();

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        log.example_orders.push(order.clone());

        // Linear decay to 10% of the base rate over the run; Adam's
        // sign-like steps otherwise leave a jitter floor near convergence.
        let epoch_tc = TrainConfig {
            learning_rate: tc.learning_rate
                * (1.0 - 0.9 * epoch as f64 / tc.epochs.max(1) as f64),
            ..tc.clone()
        };

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &train[i as usize]).collect();
            let (loss, mut grads) = batch_gradients(&params, cfg, &batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
            clip_global_norm(&mut grads, tc.gradient_clip_norm);
            adam_step(&mut params, &grads, &mut moments, &epoch_tc);
        }
        let train_nll = epoch_loss / seen as f64;

        let val_nll = if val.is_empty() {
            train_nll
        } else {
            mean_nll(&params, cfg, val)?
        };
        if !val_nll.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        log.epoch_stats.push(EpochStats {
            epoch,
            train_nll,
            val_nll,
        });
        if val_nll < log.best_val_nll {
            log.best_val_nll = val_nll;
            log.best_epoch = epoch;
            best = params.clone();
        }
    }

    Ok((best, log))
}
