//! Bounded fit of the six pore-model parameters to a measured curve.
//!
//! Parameters span several decades, so the search runs in log10 space inside
//! the allowed box: central finite-difference gradients of the MSE drive a
//! projected Adam update, restarted from seeded log-uniform draws. Only fit
//! quality is promised, not parameter identifiability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::ResponseCurve;
use crate::error::{Error, Result};
use crate::exec;

use super::pore::simulate_response;
use super::{log10_bounds, ExperimentConditions, SimulationParameters};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Central-difference step in log10 units.
    pub fd_step: f64,
    pub n_grid: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            iterations: 200,
            learning_rate: 0.15,
            fd_step: 1e-3,
            n_grid: 24,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveFit {
    pub params: SimulationParameters,
    pub mse: f64,
}

fn mse_objective(
    theta: &[f64; 6],
    conditions: &ExperimentConditions,
    target: &ResponseCurve,
    dt_s: f64,
    n_grid: usize,
) -> f64 {
    let params = SimulationParameters::from_log10(*theta, conditions);
    match simulate_response(&params, target.len(), dt_s, n_grid) {
        Ok(curve) => {
            let n = target.len() as f64;
            curve
                .response
                .iter()
                .zip(&target.response)
                .map(|(s, t)| (s - t) * (s - t))
                .sum::<f64>()
                / n
        }
        Err(_) => f64::INFINITY,
    }
}

fn clamp_to_box(theta: &mut [f64; 6], bounds: &[(f64, f64); 6]) {
    for (v, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// One projected-Adam descent from `start`; returns the best point seen.
fn descend(
    start: [f64; 6],
    conditions: &ExperimentConditions,
    target: &ResponseCurve,
    dt_s: f64,
    opts: &FitOptions,
) -> ([f64; 6], f64) {
    let bounds = log10_bounds();
    let mut theta = start;
    let mut m = [0.0f64; 6];
    let mut v = [0.0f64; 6];
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);

    let mut best_theta = theta;
    let mut best_mse = mse_objective(&theta, conditions, target, dt_s, opts.n_grid);

    for iter in 0..opts.iterations {
        // Central finite differences in log space.
        let mut grad = [0.0f64; 6];
        for j in 0..6 {
            let mut plus = theta;
            plus[j] += opts.fd_step;
            let mut minus = theta;
            minus[j] -= opts.fd_step;
            let fp = mse_objective(&plus, conditions, target, dt_s, opts.n_grid);
            let fm = mse_objective(&minus, conditions, target, dt_s, opts.n_grid);
            if !fp.is_finite() || !fm.is_finite() {
                grad[j] = 0.0;
            } else {
                grad[j] = (fp - fm) / (2.0 * opts.fd_step);
            }
        }

        let lr = opts.learning_rate * 0.5f64.powf(iter as f64 / (opts.iterations as f64 / 3.0));
        let t = (iter + 1) as i32;
        for j in 0..6 {
            m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
            v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
            let m_hat = m[j] / (1.0 - b1.powi(t));
            let v_hat = v[j] / (1.0 - b2.powi(t));
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        clamp_to_box(&mut theta, &bounds);

        let mse = mse_objective(&theta, conditions, target, dt_s, opts.n_grid);
        if mse < best_mse {
            best_mse = mse;
            best_theta = theta;
        }
    }
    (best_theta, best_mse)
}

/// Fits the six bounded parameters so the simulated response matches the
/// target in mean squared error at the target's own timestamps.
pub fn fit_params_to_curve(
    target: &ResponseCurve,
    conditions: &ExperimentConditions,
    opts: &FitOptions,
) -> Result<CurveFit> {
    if target.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "fit target needs at least 20 timesteps, got {}",
            target.len()
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }
    // The solver samples uniformly from t = 0; demand the target does too.
    let dt_s = target.times_s[1] - target.times_s[0];
    let uniform = target.times_s[0] == 0.0
        && target
            .times_s
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt_s).abs() <= 1e-6 * dt_s);
    if !uniform {
        return Err(Error::InvalidInput(
            "fit target must be uniformly sampled starting at t = 0".into(),
        ));
    }

    let bounds = log10_bounds();
    let results = exec::map_range(opts.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1000 * r as u64));
        let mut start = [0.0f64; 6];
        for (s, (lo, hi)) in start.iter_mut().zip(&bounds) {
            *s = rng.random_range(*lo..*hi);
        }
        descend(start, conditions, target, dt_s, opts)
    });

    let (theta, mse) = results
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if !mse.is_finite() {
        return Err(Error::SolverDiverged { t_s: f64::NAN });
    }
    Ok(CurveFit {
        params: SimulationParameters::from_log10(theta, conditions),
        mse,
    })
}
