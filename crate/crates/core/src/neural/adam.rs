//! Bias-corrected Adam update and global-norm gradient clipping.

use super::{NetworkConfig, NetworkParameters, TrainConfig};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamMoments {
    pub first: NetworkParameters,
    pub second: NetworkParameters,
    pub step: u64,
}

impl AdamMoments {
    pub fn new(cfg: &NetworkConfig) -> Self {
        AdamMoments {
            first: NetworkParameters::zeros(cfg),
            second: NetworkParameters::zeros(cfg),
            step: 0,
        }
    }
}

/// One standard Adam step; increments the internal step counter so the bias
/// correction uses t >= 1.
pub fn adam_step(
    params: &mut NetworkParameters,
    grads: &NetworkParameters,
    moments: &mut AdamMoments,
    tc: &TrainConfig,
) {
    moments.step += 1;
    let t = moments.step as i32;
    let (b1, b2) = (tc.adam_beta1, tc.adam_beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);

    let mut p_tensors = params.tensors_mut();
    let g_tensors = grads.tensors();
    let mut m_tensors = moments.first.tensors_mut();
    let mut v_tensors = moments.second.tensors_mut();

    for i in 0..p_tensors.len() {
        let p = &mut p_tensors[i];
        let g = g_tensors[i];
        let m = &mut m_tensors[i];
        let v = &mut v_tensors[i];
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= tc.learning_rate * m_hat / (v_hat.sqrt() + tc.adam_epsilon);
        }
    }
}

/// Scales gradients in place so their global L2 norm does not exceed
/// `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut NetworkParameters, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            for g in t.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetworkConfig {
        NetworkConfig {
            lstm_layer_sizes: vec![3],
            input_dim: 1,
            sequence_length: 4,
            variance_floor: 1e-6,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = NetworkParameters::init(&cfg, &mut rng);
        let before = params.clone();
        let grads = NetworkParameters::zeros(&cfg);
        let mut moments = AdamMoments::new(&cfg);
        adam_step(&mut params, &grads, &mut moments, &TrainConfig::default());
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_is_a_learning_rate_sized_sign_step() {
        // With t = 1 the bias corrections cancel, so each coordinate moves
        // by lr * g/(|g| + eps) regardless of magnitude.
        let cfg = cfg();
        let mut params = NetworkParameters::zeros(&cfg);
        let mut grads = NetworkParameters::zeros(&cfg);
        grads.head_b[0] = 1234.5;
        grads.head_b[1] = -0.5;
        let mut moments = AdamMoments::new(&cfg);
        let tc = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        adam_step(&mut params, &grads, &mut moments, &tc);
        assert!((params.head_b[0] + 0.01).abs() < 1e-6);
        assert!((params.head_b[1] - 0.01).abs() < 1e-6);
        assert_eq!(moments.step, 1);
    }

    #[test]
    fn updates_are_deterministic() {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = NetworkParameters::init(&cfg, &mut rng);
        let mut grads = NetworkParameters::zeros(&cfg);
        grads.head_w.iter_mut().enumerate().for_each(|(i, g)| *g = i as f64 * 0.1);

        let run = || {
            let mut p = init.clone();
            let mut m = AdamMoments::new(&cfg);
            for _ in 0..10 {
                adam_step(&mut p, &grads, &mut m, &TrainConfig::default());
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_preserves_direction_and_caps_norm() {
        let cfg = cfg();
        let mut grads = NetworkParameters::zeros(&cfg);
        grads.head_b[0] = 3.0;
        grads.head_b[1] = 4.0;
        let pre = clip_global_norm(&mut grads, 1.0);
        assert!((pre - 5.0).abs() < 1e-12);
        assert!((grads.head_b[0] - 0.6).abs() < 1e-12);
        assert!((grads.head_b[1] - 0.8).abs() < 1e-12);

        let mut small = NetworkParameters::zeros(&cfg);
        small.head_b[0] = 0.1;
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.head_b[0], 0.1);
    }
}
