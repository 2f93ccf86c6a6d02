//! Redlich-Peterson equilibrium isotherm and its least-squares fit.
//!
//! The three-parameter form K·c / (1 + a·c^g) spans Henry (a = 0) through
//! Langmuir (g = 1) behavior. The fit exploits that the model is linear in K
//! for fixed (a, g): K is profiled out in closed form and a multi-start
//! Nelder-Mead search runs over unconstrained transforms of (a, g).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsothermParameters {
    /// Numerator constant, response per concentration.
    #[serde(rename = "K")]
    pub k: f64,
    /// Denominator constant.
    pub a: f64,
    /// Exponent in (0, 1].
    pub g: f64,
}

/// Equilibrium response at concentration `c`.
pub fn redlich_peterson(c: f64, p: &IsothermParameters) -> f64 {
    p.k * c / (1.0 + p.a * c.powf(p.g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsothermFit {
    #[serde(flatten)]
    pub params: IsothermParameters,
    pub residual_sse: f64,
}

/// Basis weight of one point for fixed (a, g); the model is K times this.
fn weight(c: f64, a: f64, g: f64) -> f64 {
    c / (1.0 + a * c.powf(g))
}

/// Closed-form optimal K and the resulting SSE for fixed (a, g).
fn profile_k(points: &[(f64, f64)], a: f64, g: f64) -> (f64, f64) {
    let mut wy = 0.0;
    let mut ww = 0.0;
    for &(c, y) in points {
        let w = weight(c, a, g);
        wy += w * y;
        ww += w * w;
    }
    let k = if ww > 0.0 { wy / ww } else { 0.0 };
    let sse = points
        .iter()
        .map(|&(c, y)| {
            let r = k * weight(c, a, g) - y;
            r * r
        })
        .sum();
    (k, sse)
}

fn transform(x: &[f64]) -> (f64, f64) {
    let a = x[0].exp();
    let g = 1.0 / (1.0 + (-x[1]).exp());
    (a, g)
}

/// Standard Nelder-Mead on an n-dimensional objective.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-14 * (1.0 + best.abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let at = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + coef * (centroid[j] - simplex[n].0[j]))
                .collect()
        };

        let reflected = at(1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = at(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = at(-0.5);
            let fc = f(&contracted);
            if fc < simplex[n].1 {
                simplex[n] = (contracted, fc);
            } else {
                let best_point = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        entry.0[j] = best_point[j] + 0.5 * (entry.0[j] - best_point[j]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex.swap_remove(0).into()
}

/// Fits (K, a, g) to (concentration, equilibrium response) points by
/// minimizing the sum of squared residuals with multi-start local search.
pub fn fit_isotherm(points: &[(f64, f64)]) -> Result<IsothermFit> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "isotherm fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput(
            "isotherm fit needs at least 3 distinct concentrations".into(),
        ));
    }
    if points.iter().any(|&(c, y)| c < 0.0 || !c.is_finite() || !y.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if points.iter().all(|&(_, y)| y == 0.0) {
        return Err(Error::DegenerateFit);
    }

    let objective = |x: &[f64]| -> f64 {
        let (a, g) = transform(x);
        profile_k(points, a, g).1
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for u in [-4.0, -1.0, 1.0, 3.0] {
        for v in [-1.5, 0.0, 1.5] {
            let (x, sse) = nelder_mead(&objective, &[u, v], 0.8, 400);
            if best.as_ref().is_none_or(|(_, b)| sse < *b) {
                best = Some((x, sse));
            }
        }
    }
    let (x, _) = best.unwrap();
    let (x, sse) = nelder_mead(&objective, &x, 0.05, 400);

    let (a, g) = transform(&x);
    let (k, _) = profile_k(points, a, g);
    Ok(IsothermFit {
        params: IsothermParameters { k, a, g },
        residual_sse: sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 12 nonzero assay concentrations, mg/mL.
    pub(crate) const CONCENTRATIONS: [f64; 12] = [
        40.0, 20.0, 10.0, 4.0, 2.0, 1.0, 0.4, 0.2, 0.1, 0.04, 0.02, 0.002,
    ];

    #[test]
    fn closed_form_values() {
        let langmuir = IsothermParameters { k: 2.0, a: 1.0, g: 1.0 };
        assert_eq!(redlich_peterson(0.0, &langmuir), 0.0);
        assert!((redlich_peterson(1.0, &langmuir) - 1.0).abs() < 1e-15);

        let henry = IsothermParameters { k: 3.0, a: 0.0, g: 0.7 };
        assert!((redlich_peterson(2.5, &henry) - 7.5).abs() < 1e-15);
    }

    #[test]
    fn round_trips_noiseless_paper_grid_within_two_percent() {
        let truth = IsothermParameters { k: 0.05, a: 1.2, g: 0.9 };
        let points: Vec<(f64, f64)> = CONCENTRATIONS
            .iter()
            .map(|&c| (c, redlich_peterson(c, &truth)))
            .collect();
        let fit = fit_isotherm(&points).unwrap();
        assert!(
            (fit.params.k / truth.k - 1.0).abs() <= 0.02,
            "K {} vs {}",
            fit.params.k,
            truth.k
        );
        assert!((fit.params.a / truth.a - 1.0).abs() <= 0.02, "a {}", fit.params.a);
        assert!((fit.params.g / truth.g - 1.0).abs() <= 0.02, "g {}", fit.params.g);
    }

    #[test]
    fn rejects_insufficient_points() {
        let two = [(1.0, 0.1), (2.0, 0.2)];
        assert!(fit_isotherm(&two).is_err());
        let repeated = [(1.0, 0.1), (1.0, 0.11), (2.0, 0.2), (2.0, 0.19)];
        assert!(fit_isotherm(&repeated).is_err());
    }

    #[test]
    fn rejects_all_zero_responses() {
        let zeros: Vec<(f64, f64)> = CONCENTRATIONS.iter().map(|&c| (c, 0.0)).collect();
        assert!(matches!(fit_isotherm(&zeros), Err(Error::DegenerateFit)));
    }

    #[test]
    fn response_scale_moves_k_and_leaves_g() {
        let truth = IsothermParameters { k: 0.05, a: 1.2, g: 0.9 };
        let points: Vec<(f64, f64)> = CONCENTRATIONS
            .iter()
            .map(|&c| (c, redlich_peterson(c, &truth)))
            .collect();
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(c, y)| (c, 3.0 * y)).collect();
        let base = fit_isotherm(&points).unwrap();
        let big = fit_isotherm(&scaled).unwrap();
        assert!((big.params.k / base.params.k - 3.0).abs() <= 0.01);
        assert!((big.params.g - base.params.g).abs() <= 0.01);
    }
}
