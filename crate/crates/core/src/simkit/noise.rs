//! White Gaussian noise injection at a target S/N level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curve::ResponseCurve;
use crate::error::{Error, Result};

/// S/N is the equilibrium response magnitude divided by the noise standard
/// deviation. An infinite S/N is the "no noise" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr: f64,
    pub seed: u64,
}

/// Adds i.i.d. zero-mean Gaussian noise with σ = amplitude / snr to every
/// point except index 0, which stays 0 to preserve the normalization
/// convention. The amplitude is the curve's final response magnitude unless
/// the caller supplies a reference (needed when the curve ends at zero, e.g.
/// buffer-only controls).
pub fn add_noise(
    curve: &ResponseCurve,
    spec: &NoiseSpec,
    reference_amplitude: Option<f64>,
) -> Result<ResponseCurve> {
    if !(spec.snr > 0.0) {
        return Err(Error::InvalidInput("S/N must be positive".into()));
    }
    if spec.snr.is_infinite() {
        return Ok(curve.clone());
    }
    let amplitude = match reference_amplitude {
        Some(a) => a,
        None => curve.final_response().abs(),
    };
    if !(amplitude > 0.0) {
        return Err(Error::AmbiguousSnr);
    }

    let sigma = amplitude / spec.snr;
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let response: Vec<f64> = curve
        .response
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 { v } else { v + normal.sample(&mut rng) })
        .collect();
    ResponseCurve::new(curve.times_s.clone(), response, curve.meta.clone())
}
