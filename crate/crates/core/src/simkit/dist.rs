//! Multivariate Gaussian model of fitted parameter sets in log10 space.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{log10_bounds, ExperimentConditions, SimulationParameters, PARAM_BOUNDS};

const MIN_FITS: usize = 7;
const MAX_REJECTION_ATTEMPTS: usize = 1000;

/// Mean and covariance of the six fitted parameters in log10 space, plus the
/// box they are confined to (linear units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDistribution {
    pub mean: [f64; 6],
    pub covariance: [[f64; 6]; 6],
    pub bounds: [(f64, f64); 6],
}

impl ParameterDistribution {
    /// A diagonal distribution from per-parameter log10 means and standard
    /// deviations.
    pub fn diagonal(mean: [f64; 6], sd_log10: [f64; 6]) -> Self {
        let mut covariance = [[0.0; 6]; 6];
        for i in 0..6 {
            covariance[i][i] = sd_log10[i] * sd_log10[i];
        }
        ParameterDistribution {
            mean,
            covariance,
            bounds: PARAM_BOUNDS,
        }
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(6, 6, |i, j| self.covariance[i][j])
    }

    /// Symmetric square-root factor with negative eigenvalues floored to
    /// zero.
    fn factor(&self) -> DMatrix<f64> {
        let eig = self.covariance_matrix().symmetric_eigen();
        let sqrt = DMatrix::from_diagonal(&DVector::from_iterator(
            6,
            eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
        ));
        &eig.eigenvectors * sqrt * eig.eigenvectors.transpose()
    }
}

/// Sample mean and covariance of the fitted sets in log10 space; the
/// covariance is symmetrized and eigenvalue-floored at zero.
pub fn fit_param_distribution(fits: &[SimulationParameters]) -> Result<ParameterDistribution> {
    if fits.len() < MIN_FITS {
        return Err(Error::InsufficientFits {
            required: MIN_FITS,
            got: fits.len(),
        });
    }
    let n = fits.len() as f64;
    let logs: Vec<[f64; 6]> = fits.iter().map(|p| p.fitted_log10()).collect();

    let mut mean = [0.0f64; 6];
    for row in &logs {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }

    let mut cov = [[0.0f64; 6]; 6];
    for row in &logs {
        for i in 0..6 {
            for j in 0..6 {
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    // Symmetrize against accumulation order, then floor the spectrum.
    for i in 0..6 {
        for j in (i + 1)..6 {
            let s = 0.5 * (cov[i][j] + cov[j][i]);
            cov[i][j] = s;
            cov[j][i] = s;
        }
    }
    let eig = DMatrix::from_fn(6, 6, |i, j| cov[i][j]).symmetric_eigen();
    let floored = DMatrix::from_diagonal(&DVector::from_iterator(
        6,
        eig.eigenvalues.iter().map(|&l| l.max(0.0)),
    ));
    let rebuilt = &eig.eigenvectors * floored * eig.eigenvectors.transpose();
    for i in 0..6 {
        for j in 0..6 {
            cov[i][j] = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
        }
    }

    Ok(ParameterDistribution {
        mean,
        covariance: cov,
        bounds: PARAM_BOUNDS,
    })
}

/// Draws parameter sets from the log10 Gaussian, rejecting and redrawing any
/// sample outside the box or with a blocked pore.
pub fn sample_params(
    dist: &ParameterDistribution,
    n: usize,
    seed: u64,
    conditions: &ExperimentConditions,
) -> Result<Vec<SimulationParameters>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let factor = dist.factor();
    let log_bounds = log10_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);

    for _ in 0..n {
        let mut accepted = None;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let z = DVector::from_iterator(6, (0..6).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            }));
            let shift = &factor * z;
            let mut theta = [0.0f64; 6];
            for i in 0..6 {
                theta[i] = dist.mean[i] + shift[i];
            }
            let in_box = theta
                .iter()
                .zip(&log_bounds)
                .all(|(v, (lo, hi))| (*lo..=*hi).contains(v));
            if !in_box {
                continue;
            }
            let params = SimulationParameters::from_log10(theta, conditions);
            if 2.0 * params.r_h < params.d_pore {
                accepted = Some(params);
                break;
            }
        }
        match accepted {
            Some(p) => out.push(p),
            None => {
                return Err(Error::DistributionInfeasible {
                    attempts: MAX_REJECTION_ATTEMPTS,
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_box_point() -> SimulationParameters {
        SimulationParameters {
            k_a: 3e2,
            k_d: 3e-3,
            b_max: 1e-6,
            d_pore: 23.0,
            d_bulk: 1e-10,
            r_h: 4.9,
            c_bulk: 1.0,
            film_thickness_um: 3.63,
        }
    }

    #[test]
    fn identical_fits_collapse_to_a_point() {
        let fits = vec![mid_box_point(); 8];
        let dist = fit_param_distribution(&fits).unwrap();
        assert_eq!(dist.mean, mid_box_point().fitted_log10());
        for row in &dist.covariance {
            for &v in row {
                assert!(v.abs() < 1e-18);
            }
        }
    }

    #[test]
    fn mean_is_the_arithmetic_log10_mean() {
        let mut fits = vec![mid_box_point(); 7];
        fits[0].k_a = 1e2;
        fits[1].k_a = 1e3;
        let dist = fit_param_distribution(&fits).unwrap();
        let expected: f64 =
            fits.iter().map(|p| p.k_a.log10()).sum::<f64>() / fits.len() as f64;
        assert!((dist.mean[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn too_few_fits_is_an_error() {
        let fits = vec![mid_box_point(); 6];
        assert!(matches!(
            fit_param_distribution(&fits),
            Err(Error::InsufficientFits { required: 7, got: 6 })
        ));
    }

    #[test]
    fn monte_carlo_self_consistency() {
        // Sample heavily, re-estimate, and compare against the sampling
        // distribution: mean within 1%, covariance entries within 5% of the
        // largest eigenvalue.
        let mean = mid_box_point().fitted_log10();
        let sd = [0.25, 0.25, 0.2, 0.05, 0.2, 0.02];
        let dist = ParameterDistribution::diagonal(mean, sd);
        let conditions = ExperimentConditions::default();
        let samples = sample_params(&dist, 100_000, 5, &conditions).unwrap();
        let refit = fit_param_distribution(&samples).unwrap();

        // Rejection at the box edges is negligible for these scales.
        for i in 0..6 {
            let tol = 0.01 * mean[i].abs().max(0.1);
            assert!(
                (refit.mean[i] - mean[i]).abs() <= tol,
                "mean[{i}] {} vs {}",
                refit.mean[i],
                mean[i]
            );
        }
        let max_eig = sd.iter().map(|s| s * s).fold(0.0f64, f64::max);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { sd[i] * sd[i] } else { 0.0 };
                assert!(
                    (refit.covariance[i][j] - want).abs() <= 0.05 * max_eig,
                    "cov[{i}][{j}] {} vs {}",
                    refit.covariance[i][j],
                    want
                );
            }
        }
    }

    #[test]
    fn zero_covariance_repeats_the_mean() {
        let dist = ParameterDistribution::diagonal(mid_box_point().fitted_log10(), [0.0; 6]);
        let samples = sample_params(&dist, 5, 9, &ExperimentConditions::default()).unwrap();
        for s in &samples {
            for (a, b) in s.fitted_log10().iter().zip(mid_box_point().fitted_log10()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn samples_respect_the_box_and_are_deterministic() {
        let dist = ParameterDistribution::diagonal(
            mid_box_point().fitted_log10(),
            [0.5, 0.5, 0.5, 0.1, 0.3, 0.03],
        );
        let conditions = ExperimentConditions::default();
        let a = sample_params(&dist, 200, 11, &conditions).unwrap();
        let b = sample_params(&dist, 200, 11, &conditions).unwrap();
        assert_eq!(a.len(), 200);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
        assert!(a.iter().all(SimulationParameters::in_bounds));
    }

    #[test]
    fn infeasible_distribution_errors_out() {
        // Point mass outside the box: every draw is rejected.
        let mut mean = mid_box_point().fitted_log10();
        mean[0] = 9.0; // k_a = 1e9, far above the box
        let dist = ParameterDistribution::diagonal(mean, [0.0; 6]);
        assert!(matches!(
            sample_params(&dist, 1, 0, &ExperimentConditions::default()),
            Err(Error::DistributionInfeasible { .. })
        ));
    }
}
