//! Linear discriminant analysis for visualizing fitted parameter sets by
//! concentration class.
//!
//! Solves the generalized eigenproblem S_b v = μ (S_w + εI) v through a
//! Cholesky whitening of the ridged within-class scatter, then projects onto
//! the two leading discriminant directions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Projects d-dimensional points onto the top-2 discriminant axes.
pub fn lda_project(points: &[Vec<f64>], labels: &[usize], ridge: f64) -> Result<Vec<[f64; 2]>> {
    if points.is_empty() || points.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points vs {} labels",
            points.len(),
            labels.len()
        )));
    }
    let dim = points[0].len();
    if dim < 2 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch(
            "points must share one dimension of at least 2".into(),
        ));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidInput("ridge must be nonnegative".into()));
    }

    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::NoDiscriminant);
    }

    let n = points.len();
    let global_mean = DVector::from_fn(dim, |j, _| {
        points.iter().map(|p| p[j]).sum::<f64>() / n as f64
    });

    let mut s_w = DMatrix::zeros(dim, dim);
    let mut s_b = DMatrix::zeros(dim, dim);
    for &class in &classes {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| p)
            .collect();
        let m = members.len() as f64;
        let class_mean = DVector::from_fn(dim, |j, _| {
            members.iter().map(|p| p[j]).sum::<f64>() / m
        });
        for p in &members {
            let diff = DVector::from_fn(dim, |j, _| p[j] - class_mean[j]);
            s_w += &diff * diff.transpose();
        }
        let between = &class_mean - &global_mean;
        s_b += m * &between * between.transpose();
    }
    for i in 0..dim {
        s_w[(i, i)] += ridge;
    }

    // Whiten: with S_w + εI = L Lᵀ, the generalized problem becomes the
    // symmetric eigenproblem on L⁻¹ S_b L⁻ᵀ.
    let chol = s_w.clone().cholesky().ok_or_else(|| {
        Error::InvalidInput("within-class scatter is singular; use a positive ridge".into())
    })?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&s_b)
        .ok_or_else(|| Error::InvalidInput("degenerate whitening".into()))?;
    let m_half = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::InvalidInput("degenerate whitening".into()))?;
    let sym = 0.5 * (&m_half + m_half.transpose());

    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let lt = l.transpose();
    let mut axes = Vec::with_capacity(2);
    for &idx in order.iter().take(2) {
        let u = eig.eigenvectors.column(idx).into_owned();
        let mut w = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::InvalidInput("degenerate whitening".into()))?;
        // Fix the sign so outputs are reproducible across eigensolvers.
        if let Some(lead) = w.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                w = -w;
            }
        }
        axes.push(w);
    }

    Ok(points
        .iter()
        .map(|p| {
            let centered = DVector::from_fn(dim, |j, _| p[j] - global_mean[j]);
            [axes[0].dot(&centered), axes[1].dot(&centered)]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_classes_separate_with_zero_spread() {
        let points = vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 2.0, -1.0],
            vec![1.0, 2.0, -1.0],
        ];
        let labels = vec![0, 0, 1, 1];
        let proj = lda_project(&points, &labels, 1e-9).unwrap();
        assert!((proj[0][0] - proj[1][0]).abs() < 1e-9);
        assert!((proj[2][0] - proj[3][0]).abs() < 1e-9);
        assert!((proj[0][0] - proj[2][0]).abs() > 1e-6);
    }

    #[test]
    fn single_class_has_no_discriminant() {
        let points = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            lda_project(&points, &[3, 3], 1e-9),
            Err(Error::NoDiscriminant)
        ));
    }

    fn gaussian_classes(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [2.0, 1.0, -1.0, 0.5, 0.0, 1.0],
            [-1.0, 2.0, 1.0, -0.5, 1.0, 0.0],
        ];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (ci, center) in centers.iter().enumerate() {
            for _ in 0..40 {
                let p: Vec<f64> = center
                    .iter()
                    .map(|&m| m + rng.random_range(-0.5..0.5))
                    .collect();
                points.push(p);
                labels.push(ci);
            }
        }
        (points, labels)
    }

    /// Between-class over within-class variance of one projected axis; this
    /// is the generalized eigenvalue and is invariant under invertible
    /// affine maps of the inputs as the ridge vanishes.
    fn separation_ratio(proj: &[[f64; 2]], labels: &[usize], axis: usize) -> f64 {
        let classes: Vec<usize> = {
            let mut c = labels.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        };
        let n = proj.len() as f64;
        let grand: f64 = proj.iter().map(|p| p[axis]).sum::<f64>() / n;
        let mut between = 0.0;
        let mut within = 0.0;
        for &class in &classes {
            let vals: Vec<f64> = proj
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == class)
                .map(|(p, _)| p[axis])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            between += vals.len() as f64 * (m - grand) * (m - grand);
            within += vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
        between / within
    }

    #[test]
    fn projection_is_affine_invariant_in_the_small_ridge_limit() {
        let (points, labels) = gaussian_classes(8);
        let base = lda_project(&points, &labels, 1e-12).unwrap();

        // A fixed well-conditioned affine map.
        let map = |p: &Vec<f64>| -> Vec<f64> {
            let mut out = vec![0.0; 6];
            for i in 0..6 {
                out[i] = 2.0 * p[i] + 0.3 * p[(i + 1) % 6] - 0.1 * p[(i + 2) % 6] + 1.5;
            }
            out
        };
        let mapped: Vec<Vec<f64>> = points.iter().map(map).collect();
        let transformed = lda_project(&mapped, &labels, 1e-12).unwrap();

        for axis in 0..2 {
            let r0 = separation_ratio(&base, &labels, axis);
            let r1 = separation_ratio(&transformed, &labels, axis);
            assert!(
                (r0 / r1 - 1.0).abs() < 1e-6,
                "axis {axis}: ratios {r0} vs {r1}"
            );
        }
    }

    /// Hand-rolled lower Cholesky factor of a 6x6 SPD matrix.
    fn cholesky6(m: &[[f64; 6]; 6]) -> [[f64; 6]; 6] {
        let mut l = [[0.0f64; 6]; 6];
        for i in 0..6 {
            for j in 0..=i {
                let mut sum = m[i][j];
                for k in 0..j {
                    sum -= l[i][k] * l[j][k];
                }
                if i == j {
                    l[i][j] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        l
    }

    /// Solves L x = b (forward substitution).
    fn forward_sub(l: &[[f64; 6]; 6], b: &[f64; 6]) -> [f64; 6] {
        let mut x = [0.0f64; 6];
        for i in 0..6 {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l[i][k] * x[k];
            }
            x[i] = sum / l[i][i];
        }
        x
    }

    /// Solves Lᵀ x = b (back substitution).
    fn back_sub_t(l: &[[f64; 6]; 6], b: &[f64; 6]) -> [f64; 6] {
        let mut x = [0.0f64; 6];
        for i in (0..6).rev() {
            let mut sum = b[i];
            for k in (i + 1)..6 {
                sum -= l[k][i] * x[k];
            }
            x[i] = sum / l[i][i];
        }
        x
    }

    /// Classic Jacobi rotation eigensolver for a symmetric 6x6 matrix;
    /// returns (eigenvalues, column eigenvectors).
    fn jacobi6(mut a: [[f64; 6]; 6]) -> ([f64; 6], [[f64; 6]; 6]) {
        let mut v = [[0.0f64; 6]; 6];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..6 {
                for j in (i + 1)..6 {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..6 {
                for q in (p + 1)..6 {
                    if a[p][q].abs() < 1e-18 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..6 {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..6 {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..6 {
                        let (vkp, vkq) = (v[k][p], v[k][q]);
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut eigvals = [0.0f64; 6];
        for i in 0..6 {
            eigvals[i] = a[i][i];
        }
        (eigvals, v)
    }

    #[test]
    fn matches_a_brute_force_eigensolver_oracle() {
        let (points, labels) = gaussian_classes(15);
        let ridge = 1e-9;
        let proj = lda_project(&points, &labels, ridge).unwrap();

        // Oracle: form (S_w + ridge I)^-1 S_b explicitly and power-iterate
        // with deflation for the top-2 eigenvectors.
        let n = points.len();
        let dim = 6;
        let mut grand = [0.0f64; 6];
        for p in &points {
            for j in 0..dim {
                grand[j] += p[j] / n as f64;
            }
        }
        let classes = [0usize, 1, 2];
        let mut s_w = [[0.0f64; 6]; 6];
        let mut s_b = [[0.0f64; 6]; 6];
        for &class in &classes {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(labels.iter())
                .filter(|&(_, &l)| l == class)
                .map(|(p, _)| p)
                .collect();
            let m = members.len() as f64;
            let mut mean = [0.0f64; 6];
            for p in &members {
                for j in 0..dim {
                    mean[j] += p[j] / m;
                }
            }
            for p in &members {
                for i in 0..dim {
                    for j in 0..dim {
                        s_w[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                    }
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    s_b[i][j] += m * (mean[i] - grand[i]) * (mean[j] - grand[j]);
                }
            }
        }
        for (i, row) in s_w.iter_mut().enumerate() {
            row[i] += ridge;
        }

        // Whiten with a hand-rolled Cholesky, diagonalize L⁻¹ S_b L⁻ᵀ with
        // Jacobi rotations, and map the top-2 eigenvectors back.
        let l = cholesky6(&s_w);
        let mut whitened = [[0.0f64; 6]; 6];
        for j in 0..6 {
            let col = [s_b[0][j], s_b[1][j], s_b[2][j], s_b[3][j], s_b[4][j], s_b[5][j]];
            let y = forward_sub(&l, &col); // column j of L⁻¹ S_b
            for i in 0..6 {
                whitened[i][j] = y[i];
            }
        }
        let mut sym = [[0.0f64; 6]; 6];
        for i in 0..6 {
            let row = whitened[i];
            let z = forward_sub(&l, &row); // row i of (L⁻¹ S_b) L⁻ᵀ
            sym[i] = z;
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let s = 0.5 * (sym[i][j] + sym[j][i]);
                sym[i][j] = s;
                sym[j][i] = s;
            }
        }
        let (eigvals, eigvecs) = jacobi6(sym);
        let mut order = [0usize, 1, 2, 3, 4, 5];
        order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());
        let mut axes: Vec<[f64; 6]> = Vec::new();
        for &idx in order.iter().take(2) {
            let mut u = [0.0f64; 6];
            for k in 0..6 {
                u[k] = eigvecs[k][idx];
            }
            axes.push(back_sub_t(&l, &u));
        }

        // Compare projections up to sign and scale per axis via correlation.
        let centered: Vec<[f64; 6]> = points
            .iter()
            .map(|p| {
                let mut out = [0.0; 6];
                for j in 0..6 {
                    out[j] = p[j] - grand[j];
                }
                out
            })
            .collect();
        for axis in 0..2 {
            let oracle: Vec<f64> = centered
                .iter()
                .map(|p| p.iter().zip(&axes[axis]).map(|(a, b)| a * b).sum())
                .collect();
            let ours: Vec<f64> = proj.iter().map(|p| p[axis]).collect();
            let corr = correlation(&oracle, &ours).abs();
            assert!(corr > 0.999, "axis {axis} correlation {corr}");
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }
}
