//! Deep ensembles of probabilistic LSTM forecasters.
//!
//! Members share one architecture and the full training split; diversity
//! comes only from seeded random initialization and per-epoch reshuffling.
//! Per-timestep member Gaussians are fused by uniform-mixture moment
//! matching: the mixture mean is the average member mean, and the mixture
//! variance is the average within-member variance plus the dispersion of
//! member means.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::ResponseCurve;
use crate::datahub::MinMaxStats;
use crate::error::{Error, Result};
use crate::exec;
use crate::neural::{
    load_model, network_forward, save_model, train_base_learner, NetworkConfig, NetworkParameters,
    ProbabilisticForecast, TrainConfig, TrainExample, TrainingLog,
};

const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// An immutable trained ensemble ready for serving.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub config: NetworkConfig,
    pub members: Vec<NetworkParameters>,
    pub normalizer: MinMaxStats,
    pub master_seed: u64,
}

/// Training output: the model plus per-member logs.
#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    pub model: EnsembleModel,
    pub logs: Vec<TrainingLog>,
    /// Indices of members excluded because their training diverged.
    pub diverged_members: Vec<usize>,
}

/// Uniform-mixture moments over the member forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedForecast {
    pub mu_star: Vec<f64>,
    pub var_star: Vec<f64>,
}

impl AggregatedForecast {
    pub fn len(&self) -> usize {
        self.mu_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_star.is_empty()
    }
}

/// Anything that can turn a normalized prefix into an aggregated forecast.
/// The curve-level evaluation pipeline is generic over this so reference
/// forecasters (oracle, echo) can run through the identical metric path.
pub trait Forecaster: Sync {
    fn forecast_normalized(&self, sequence: &[f64]) -> Result<AggregatedForecast>;
}

/// Derives the seed for member `index` from the ensemble master seed.
pub fn member_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add(index as u64)
}

/// Trains `m` members on the full training split (no bootstrapping) with
/// seeds derived from `master_seed` by fixed increment. Members whose
/// training diverges are excluded with a warning; the ensemble fails if more
/// than half diverge.
pub fn train_ensemble(
    train: &[TrainExample],
    val: &[TrainExample],
    net_cfg: &NetworkConfig,
    train_cfg: &TrainConfig,
    m: usize,
    master_seed: u64,
    normalizer: MinMaxStats,
) -> Result<TrainedEnsemble> {
    if m == 0 {
        return Err(Error::InvalidInput("ensemble size must be at least 1".into()));
    }
    let results = exec::map_range(m, |i| {
        let tc = TrainConfig {
            seed: member_seed(master_seed, i),
            ..train_cfg.clone()
        };
        train_base_learner(train, val, net_cfg, &tc)
    });

    let mut members = Vec::with_capacity(m);
    let mut logs = Vec::with_capacity(m);
    let mut diverged = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok((params, log)) => {
                members.push(params);
                logs.push(log);
            }
            Err(Error::TrainingDiverged { epoch }) => {
                log::warn!("member {i} diverged at epoch {epoch}; excluding it");
                diverged.push(i);
            }
            Err(other) => return Err(other),
        }
    }
    if 2 * diverged.len() > m {
        return Err(Error::EnsembleDiverged {
            diverged: diverged.len(),
            total: m,
        });
    }

    Ok(TrainedEnsemble {
        model: EnsembleModel {
            config: net_cfg.clone(),
            members,
            normalizer,
            master_seed,
        },
        logs,
        diverged_members: diverged,
    })
}

/// Fuses member forecasts per timestep:
/// mu* = mean(mu_i); var* = mean(var_i) + mean((mu_i - mu*)^2).
/// The second form of the mixture variance is used so identical members
/// reproduce the member exactly and var* never drops below the mean
/// within-member variance.
pub fn aggregate(members: &[ProbabilisticForecast]) -> Result<AggregatedForecast> {
    let m = members.len();
    if m == 0 {
        return Err(Error::InvalidInput("no member forecasts to aggregate".into()));
    }
    let len = members[0].len();
    if members.iter().any(|f| f.len() != len || f.var.len() != len) {
        return Err(Error::ShapeMismatch(
            "member forecasts have differing lengths".into(),
        ));
    }

    let mut mu_star = vec![0.0; len];
    let mut var_star = vec![0.0; len];
    for f in members {
        for (acc, &mu) in mu_star.iter_mut().zip(&f.mu) {
            *acc += mu;
        }
    }
    for v in &mut mu_star {
        *v /= m as f64;
    }
    for f in members {
        for t in 0..len {
            let d = f.mu[t] - mu_star[t];
            var_star[t] += f.var[t] + d * d;
        }
    }
    for v in &mut var_star {
        *v /= m as f64;
    }
    Ok(AggregatedForecast { mu_star, var_star })
}

impl EnsembleModel {
    /// Runs every member causally over the (normalized) prefix.
    pub fn member_forecasts(&self, sequence: &[f64]) -> Result<Vec<ProbabilisticForecast>> {
        let results = exec::map_slice(self.members.as_slice(), |params| {
            network_forward(params, &self.config, sequence)
        });
        results.into_iter().collect()
    }

    /// Aggregated forecast over a normalized prefix of any length; output
    /// step j uses only samples 0..=j.
    pub fn predict_stream(&self, sequence: &[f64]) -> Result<AggregatedForecast> {
        aggregate(&self.member_forecasts(sequence)?)
    }

    /// The ensemble restricted to its first `k` members. Member seeds depend
    /// only on the master seed and member index, so this equals an ensemble
    /// trained with M = k.
    pub fn prefix(&self, k: usize) -> EnsembleModel {
        EnsembleModel {
            config: self.config.clone(),
            members: self.members[..k.min(self.members.len())].to_vec(),
            normalizer: self.normalizer.clone(),
            master_seed: self.master_seed,
        }
    }
}

impl Forecaster for EnsembleModel {
    fn forecast_normalized(&self, sequence: &[f64]) -> Result<AggregatedForecast> {
        self.predict_stream(sequence)
    }
}

/// Builds training examples from curves: the input is the normalized
/// response sequence and the target is its final element. Curves of unequal
/// length are rejected.
pub fn examples_from_curves(
    curves: &[&ResponseCurve],
    stats: &MinMaxStats,
    expected_len: usize,
) -> Result<Vec<TrainExample>> {
    curves
        .iter()
        .map(|c| {
            if c.len() != expected_len {
                return Err(Error::ShapeMismatch(format!(
                    "curve {:?} has {} samples, expected {}",
                    c.meta.id,
                    c.len(),
                    expected_len
                )));
            }
            Ok(TrainExample::from_sequence(stats.forward(&c.response)))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    format_version: u32,
    m: usize,
    master_seed: u64,
    config: NetworkConfig,
    normalizer: MinMaxStats,
    members: Vec<String>,
}

/// Writes `ensemble.json` plus one model file per member.
pub fn save_ensemble(model: &EnsembleModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut member_files = Vec::with_capacity(model.members.len());
    for (i, params) in model.members.iter().enumerate() {
        let file = format!("member_{i:03}.eqm");
        save_model(
            &dir.join(&file),
            &model.config,
            params,
            member_seed(model.master_seed, i),
        )?;
        member_files.push(file);
    }
    let manifest = EnsembleManifest {
        format_version: ENSEMBLE_FORMAT_VERSION,
        m: model.members.len(),
        master_seed: model.master_seed,
        config: model.config.clone(),
        normalizer: model.normalizer.clone(),
        members: member_files,
    };
    fs::write(
        dir.join("ensemble.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_ensemble(dir: &Path) -> Result<EnsembleModel> {
    let manifest: EnsembleManifest =
        serde_json::from_slice(&fs::read(dir.join("ensemble.json"))?)?;
    if manifest.format_version != ENSEMBLE_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported ensemble format version {}",
            manifest.format_version
        )));
    }
    let mut members = Vec::with_capacity(manifest.members.len());
    for file in &manifest.members {
        let (cfg, params, _seed) = load_model(&dir.join(file))?;
        if cfg != manifest.config {
            return Err(Error::ModelFormat(format!(
                "member {file} was trained with a different config"
            )));
        }
        members.push(params);
    }
    if members.is_empty() {
        return Err(Error::ModelFormat("ensemble has no members".into()));
    }
    Ok(EnsembleModel {
        config: manifest.config,
        members,
        normalizer: manifest.normalizer,
        master_seed: manifest.master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> NetworkConfig {
        NetworkConfig {
            lstm_layer_sizes: vec![4],
            input_dim: 1,
            sequence_length: 8,
            variance_floor: 1e-6,
        }
    }

    fn tiny_tc() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 4,
            learning_rate: 5e-3,
            ..TrainConfig::default()
        }
    }

    fn stats() -> MinMaxStats {
        MinMaxStats {
            min_response: 0.0,
            max_response: 1.0,
            source: "train".into(),
        }
    }

    fn toy_examples(n: usize, seed: u64) -> Vec<TrainExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(0.1..0.9);
                TrainExample::from_sequence(vec![v; 8])
            })
            .collect()
    }

    #[test]
    fn aggregation_of_identical_members_is_the_member() {
        let f = ProbabilisticForecast {
            mu: vec![0.3, 0.5],
            var: vec![0.01, 0.02],
        };
        let agg = aggregate(&[f.clone(), f.clone(), f.clone()]).unwrap();
        assert_eq!(agg.mu_star, f.mu);
        assert_eq!(agg.var_star, f.var);
    }

    #[test]
    fn aggregation_hand_example() {
        // Members (0, 1) and (2, 1): mu* = 1, var* = ((1+0)+(1+4))/2 - 1 = 2.
        let a = ProbabilisticForecast {
            mu: vec![0.0],
            var: vec![1.0],
        };
        let b = ProbabilisticForecast {
            mu: vec![2.0],
            var: vec![1.0],
        };
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.mu_star[0] - 1.0).abs() < 1e-15);
        assert!((agg.var_star[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn aggregation_is_permutation_invariant_and_bounded_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let members: Vec<ProbabilisticForecast> = (0..5)
            .map(|_| ProbabilisticForecast {
                mu: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                var: (0..6).map(|_| rng.random_range(0.01..0.5)).collect(),
            })
            .collect();
        let agg = aggregate(&members).unwrap();

        let mut reversed = members.clone();
        reversed.reverse();
        let agg_rev = aggregate(&reversed).unwrap();
        for t in 0..6 {
            assert!((agg_rev.mu_star[t] - agg.mu_star[t]).abs() <= 1e-14);
            assert!((agg_rev.var_star[t] - agg.var_star[t]).abs() <= 1e-14);
        }

        for t in 0..6 {
            let mean_var: f64 = members.iter().map(|f| f.var[t]).sum::<f64>() / 5.0;
            assert!(agg.var_star[t] + 1e-12 >= mean_var);
        }
    }

    #[test]
    fn aggregate_rejects_mismatched_lengths() {
        let a = ProbabilisticForecast {
            mu: vec![0.0; 3],
            var: vec![1.0; 3],
        };
        let b = ProbabilisticForecast {
            mu: vec![0.0; 2],
            var: vec![1.0; 2],
        };
        assert!(matches!(aggregate(&[a, b]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn single_member_ensemble_reduces_to_the_member() {
        let train = toy_examples(12, 1);
        let ensemble =
            train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 1, 9, stats()).unwrap();
        let seq = vec![0.4; 8];
        let member = network_forward(&ensemble.model.members[0], &tiny_cfg(), &seq).unwrap();
        let agg = ensemble.model.predict_stream(&seq).unwrap();
        assert_eq!(agg.mu_star, member.mu);
        assert_eq!(agg.var_star, member.var);
    }

    #[test]
    fn same_master_seed_reproduces_members() {
        let train = toy_examples(12, 2);
        let a = train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 3, 77, stats()).unwrap();
        let b = train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 3, 77, stats()).unwrap();
        assert_eq!(a.model.members, b.model.members);
        assert_eq!(a.logs, b.logs);
    }

    #[test]
    fn members_see_the_same_example_set_in_different_orders() {
        let train = toy_examples(16, 3);
        let ensemble =
            train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 3, 5, stats()).unwrap();
        let canonical: Vec<u32> = (0..16).collect();
        for log in &ensemble.logs {
            for order in &log.example_orders {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, canonical, "an epoch skipped or repeated examples");
            }
        }
        // First-epoch visit orders differ across members.
        assert_ne!(ensemble.logs[0].example_orders[0], ensemble.logs[1].example_orders[0]);
    }

    #[test]
    fn nested_prefix_matches_separately_trained_smaller_ensemble() {
        let train = toy_examples(12, 6);
        let pool = train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 4, 31, stats()).unwrap();
        let small = train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 2, 31, stats()).unwrap();
        assert_eq!(pool.model.prefix(2).members, small.model.members);
    }

    #[test]
    fn streaming_equals_batch_per_prefix_length() {
        let train = toy_examples(10, 8);
        let ensemble =
            train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 2, 13, stats()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let seq: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        let full = ensemble.model.predict_stream(&seq).unwrap();
        for k in 1..=8 {
            let partial = ensemble.model.predict_stream(&seq[..k]).unwrap();
            assert_eq!(partial.len(), k);
            assert!((partial.mu_star[k - 1] - full.mu_star[k - 1]).abs() < 1e-14);
            assert!((partial.var_star[k - 1] - full.var_star[k - 1]).abs() < 1e-14);
        }
    }

    #[test]
    fn ensemble_directory_round_trip() {
        let train = toy_examples(10, 5);
        let ensemble =
            train_ensemble(&train, &[], &tiny_cfg(), &tiny_tc(), 2, 21, stats()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_ensemble(&ensemble.model, dir.path()).unwrap();
        let back = load_ensemble(dir.path()).unwrap();
        assert_eq!(back.config, ensemble.model.config);
        assert_eq!(back.master_seed, 21);
        assert_eq!(back.members.len(), 2);
        assert_eq!(back.normalizer, ensemble.model.normalizer);

        // f32 serialization keeps forecasts close.
        let seq = vec![0.5; 8];
        let a = ensemble.model.predict_stream(&seq).unwrap();
        let b = back.predict_stream(&seq).unwrap();
        for (x, y) in a.mu_star.iter().zip(&b.mu_star) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}
