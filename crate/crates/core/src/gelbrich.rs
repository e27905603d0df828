//! A pair of non-Gaussian processes whose bicausal transport cost lies below
//! the adapted Wasserstein distance of their Gaussian surrogates, plus noise
//! recovery and a regression check of `E[ε_t | X_{1:t−1}] = 0`.
//!
//! With `Z = (ε₁² − 1)/√2`:
//!
//! ```text
//! X = (ε₁, Z)        Y = (Z, (2 + δ) Z + ε₂)
//! ```
//!
//! Both laws have Gaussian surrogates 𝒩(0, I) and 𝒩(0, B) with
//! `B = [[1, 2+δ], [2+δ, (2+δ)² + 1]]`, at adapted distance² `(2 + δ)²`,
//! while coupling through the shared noises costs `(2 + δ)² − 2δ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cholesky::{chronological_inverse, minimal_cholesky, PSD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, Matrix, Vector};
use crate::metrics::aw2_gaussian_laws_sq;

#[derive(Debug, Clone, PartialEq)]
pub struct GelbrichInstance {
    pub delta: f64,
    pub analytic_gaussian_aw2: f64,
    pub analytic_coupling_cost: f64,
}

impl GelbrichInstance {
    pub fn covariance_x(&self) -> Matrix {
        Matrix::identity(2, 2)
    }

    pub fn covariance_y(&self) -> Matrix {
        let c = 2.0 + self.delta;
        Matrix::from_row_slice(2, 2, &[1.0, c, c, c * c + 1.0])
    }
}

pub fn build_counterexample(delta: f64) -> Result<GelbrichInstance> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Range(format!("delta must be positive and finite, got {delta}")));
    }
    let c = 2.0 + delta;
    let inst = GelbrichInstance { delta, analytic_gaussian_aw2: c * c, analytic_coupling_cost: c * c - 2.0 * delta };
    let zero = Vector::zeros(2);
    let computed = aw2_gaussian_laws_sq(&zero, &inst.covariance_x(), &zero, &inst.covariance_y(), 1)?;
    if (computed - inst.analytic_gaussian_aw2).abs() > 1e-10 * (1.0 + c * c) {
        return Err(Error::Consistency(format!(
            "Gaussian adapted distance {computed} differs from (2 + delta)^2 = {}",
            c * c
        )));
    }
    Ok(inst)
}

/// n samples of X and Y (rows), driven by the same noises.
pub fn counterexample_paths(delta: f64, n: usize, seed: u64) -> Result<(Matrix, Matrix)> {
    build_counterexample(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, 2);
    let mut y = Matrix::zeros(n, 2);
    let c = 2.0 + delta;
    for i in 0..n {
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        let z = (e1 * e1 - 1.0) / std::f64::consts::SQRT_2;
        x[(i, 0)] = e1;
        x[(i, 1)] = z;
        y[(i, 0)] = z;
        y[(i, 1)] = c * z + e2;
    }
    Ok((x, y))
}

/// Monte Carlo mean of `‖X − Y‖²` and its standard error (infinite for n = 1).
pub fn monte_carlo_counterexample_cost(delta: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    build_counterexample(delta)?;
    if n == 0 {
        return Err(Error::Range("number of samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 2.0 + delta;
    // Welford running moments
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n {
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        let z = (e1 * e1 - 1.0) / std::f64::consts::SQRT_2;
        let cost = (e1 - z).powi(2) + (z - c * z - e2).powi(2);
        let delta_mean = cost - mean;
        mean += delta_mean / (i + 1) as f64;
        m2 += delta_mean * (cost - mean);
    }
    if n < 2 {
        return Ok((mean, f64::INFINITY));
    }
    let var = m2 / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// `ε = L^⊖ (X − a)` applied to each sample row, with `L = C_min(A)`.
pub fn noise_recovery(samples: &Matrix, a: &Vector, cov: &Matrix) -> Result<Matrix> {
    let dim = cov.nrows();
    if samples.ncols() != dim || a.len() != dim {
        return Err(Error::Dimension(format!(
            "samples have {} columns, mean has length {}, covariance is {dim}x{dim}",
            samples.ncols(),
            a.len()
        )));
    }
    let inv = chronological_inverse(&minimal_cholesky(cov, PSD_TOL)?).matrix;
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= a.transpose();
    }
    Ok(centered * inv.transpose())
}

/// Least-squares fit of each coordinate of `ε_t` on
/// `[1, X_{1:t−1}, X_{1:t−1}²]` (squares taken entrywise, no cross terms).
#[derive(Debug, Clone)]
pub struct MdcReport {
    pub feature_names: Vec<String>,
    /// features × d
    pub coefficients: Matrix,
    /// features × d
    pub std_errors: Matrix,
    /// One entry per coordinate of `ε_t`.
    pub r_squared: Vec<f64>,
}

impl MdcReport {
    /// Largest |coefficient| / standard error over the non-intercept features.
    pub fn max_t_statistic(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 1..self.coefficients.nrows() {
            for j in 0..self.coefficients.ncols() {
                let se = self.std_errors[(i, j)];
                if se > 0.0 {
                    best = best.max(self.coefficients[(i, j)].abs() / se);
                }
            }
        }
        best
    }
}

/// Regression diagnostic at time step `step` (0-based) for processes in ℝ^d.
pub fn mdc_diagnostic(noise: &Matrix, paths: &Matrix, step: usize, dim: usize) -> Result<MdcReport> {
    let n = noise.nrows();
    if paths.nrows() != n || noise.ncols() != paths.ncols() {
        return Err(Error::Dimension("noise and path samples are not aligned".into()));
    }
    if dim == 0 || paths.ncols() % dim != 0 || (step + 1) * dim > paths.ncols() {
        return Err(Error::Dimension(format!("step {step} with d = {dim} does not fit {} columns", paths.ncols())));
    }
    let past = step * dim;
    let p = 1 + 2 * past;
    if n < 10 * p {
        return Err(Error::InsufficientSamples { got: n, need: 10 * p });
    }
    let mut names = vec!["1".to_string()];
    names.extend((0..past).map(|j| format!("x{}", j + 1)));
    names.extend((0..past).map(|j| format!("x{}^2", j + 1)));
    let design = Matrix::from_fn(n, p, |i, j| {
        if j == 0 {
            1.0
        } else if j <= past {
            paths[(i, j - 1)]
        } else {
            paths[(i, j - 1 - past)].powi(2)
        }
    });
    let target = noise.columns(step * dim, dim).into_owned();
    let gram_inv = pseudo_inverse(&design.tr_mul(&design), 1e-12)?;
    let coefficients = &gram_inv * design.tr_mul(&target);
    let resid = &target - &design * &coefficients;
    let dof = (n - p).max(1) as f64;
    let mut std_errors = Matrix::zeros(p, dim);
    let mut r_squared = Vec::with_capacity(dim);
    for j in 0..dim {
        let rss = resid.column(j).norm_squared();
        let col = target.column(j);
        let mean = col.mean();
        let tss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        r_squared.push(if tss > 0.0 { 1.0 - rss / tss } else { 0.0 });
        let sigma2 = rss / dof;
        for i in 0..p {
            std_errors[(i, j)] = (sigma2 * gram_inv[(i, i)].max(0.0)).sqrt();
        }
    }
    Ok(MdcReport { feature_names: names, coefficients, std_errors, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_one_values() {
        let g = build_counterexample(1.0).unwrap();
        assert_eq!(g.analytic_gaussian_aw2, 9.0);
        assert_eq!(g.analytic_coupling_cost, 7.0);
        assert!(build_counterexample(0.0).is_err());
        assert!(build_counterexample(-1.0).is_err());
    }

    #[test]
    fn small_delta_limit() {
        let g = build_counterexample(1e-9).unwrap();
        assert!((g.analytic_gaussian_aw2 - 4.0).abs() < 1e-8);
        assert!((g.analytic_coupling_cost - 4.0).abs() < 1e-8);
    }

    #[test]
    fn single_sample_error_is_infinite() {
        let (_, se) = monte_carlo_counterexample_cost(1.0, 1, 0).unwrap();
        assert!(se.is_infinite());
    }

    #[test]
    fn constant_samples_have_zero_noise() {
        let a = Vector::from_vec(vec![1.0, 2.0]);
        let x = Matrix::from_fn(4, 2, |_, j| a[j]);
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(noise_recovery(&x, &a, &cov).unwrap(), Matrix::zeros(4, 2));
    }

    #[test]
    fn too_few_samples() {
        let x = Matrix::zeros(10, 2);
        assert!(matches!(mdc_diagnostic(&x, &x, 1, 1), Err(Error::InsufficientSamples { got: 10, need: 30 })));
    }
}
