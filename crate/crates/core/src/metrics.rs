//! Bures–Wasserstein, W₂ and adapted Wasserstein distances between Gaussian
//! laws and filtered Gaussian processes.
//!
//! | quantity | formula |
//! |---|---|
//! | BW²(A, B) | `tr A + tr B − 2 tr((A^½ B A^½)^½)` = `‖L‖² + ‖M‖² − 2‖LᵀM‖_*` |
//! | dist_AW²(L, M) | `‖L‖² + ‖M‖² − 2 Σ_t ‖(LᵀM)_{t,t}‖_*` |
//! | AW₂²(X, Y) | `‖a − b‖² + dist_AW²(L, M)` |
//!
//! Functions without a `_sq` suffix return distances, not squares.

use crate::cholesky::{minimal_cholesky, PSD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{canonical_trace_maximizer, ensure_square, nuclear_norm, psd_sqrt, Matrix, Vector};
use crate::process::{factor_is_martingale, BlockLowerCholesky, FilteredGaussianProcess};

/// Absolute slack (relative to `1 + scale`) for negative squared distances.
pub const RADICAND_TOL: f64 = 1e-9;

/// Clamps rounding-level negative radicands to zero.
pub fn clamp_radicand(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -RADICAND_TOL * (1.0 + scale.abs()) {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!("squared distance {value:e} is negative")))
    }
}

fn check_cov_pair(a: &Matrix, b: &Matrix) -> Result<()> {
    ensure_square(a, "covariance A")?;
    ensure_square(b, "covariance B")?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "covariances are {}x{} and {}x{}",
            a.nrows(),
            a.nrows(),
            b.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// BW² through matrix square roots.
pub fn bures_wasserstein_sq_sqrtm(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_cov_pair(a, b)?;
    minimal_cholesky(a, PSD_TOL)?;
    minimal_cholesky(b, PSD_TOL)?;
    // tr((A^½ B A^½)^½) = ‖B^½ A^½‖_*, which avoids a second square root
    let cross = psd_sqrt(b)? * psd_sqrt(a)?;
    let scale = a.trace() + b.trace();
    clamp_radicand(scale - 2.0 * nuclear_norm(&cross)?, scale)
}

/// BW² through minimal Cholesky factors.
pub fn bures_wasserstein_sq_cholesky(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_cov_pair(a, b)?;
    let l = minimal_cholesky(a, PSD_TOL)?.factor;
    let m = minimal_cholesky(b, PSD_TOL)?.factor;
    factor_bw_sq(&l, &m)
}

/// `BW²(LLᵀ, MMᵀ) = ‖L‖² + ‖M‖² − 2‖LᵀM‖_*` for arbitrary factors.
pub fn factor_bw_sq(l: &Matrix, m: &Matrix) -> Result<f64> {
    if l.nrows() != m.nrows() {
        return Err(Error::Dimension("factors have different row counts".into()));
    }
    let scale = l.norm_squared() + m.norm_squared();
    clamp_radicand(scale - 2.0 * nuclear_norm(&(l.transpose() * m))?, scale)
}

pub fn bures_wasserstein_sq(a: &Matrix, b: &Matrix) -> Result<f64> {
    bures_wasserstein_sq_cholesky(a, b)
}

pub fn bures_wasserstein(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(bures_wasserstein_sq(a, b)?.sqrt())
}

fn mean_gap_sq(a: &Vector, b: &Vector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("means have lengths {} and {}", a.len(), b.len())));
    }
    Ok((a - b).norm_squared())
}

pub fn w2_gaussian_sq(a: &Vector, cov_a: &Matrix, b: &Vector, cov_b: &Matrix) -> Result<f64> {
    check_cov_pair(cov_a, cov_b)?;
    if a.len() != cov_a.nrows() {
        return Err(Error::Dimension("mean and covariance sizes differ".into()));
    }
    Ok(mean_gap_sq(a, b)? + bures_wasserstein_sq(cov_a, cov_b)?)
}

pub fn w2_gaussian(a: &Vector, cov_a: &Matrix, b: &Vector, cov_b: &Matrix) -> Result<f64> {
    Ok(w2_gaussian_sq(a, cov_a, b, cov_b)?.sqrt())
}

/// Diagonal blocks `(LᵀM)_{t,t} = L_{·,t}ᵀ M_{·,t}`.
pub fn diagonal_cross_blocks(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<Vec<Matrix>> {
    l.same_shape(m)?;
    Ok((0..l.n_steps()).map(|t| l.column_block(t).transpose() * m.column_block(t)).collect())
}

/// `‖(LᵀM)_{t,t}‖_*` for each t.
pub fn diagonal_cross_nuclear(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<Vec<f64>> {
    diagonal_cross_blocks(l, m)?.iter().map(nuclear_norm).collect()
}

pub fn dist_aw_sq(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<f64> {
    // fixed argument order, so the result is bitwise symmetric
    let (l, m) = if entry_order(l, m).is_gt() { (m, l) } else { (l, m) };
    let nuc: f64 = diagonal_cross_nuclear(l, m)?.iter().sum();
    let scale = l.frobenius_sq() + m.frobenius_sq();
    clamp_radicand(scale - 2.0 * nuc, scale)
}

fn entry_order(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> std::cmp::Ordering {
    let (a, b) = (l.as_matrix().as_slice(), m.as_matrix().as_slice());
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
}

pub fn dist_aw(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<f64> {
    Ok(dist_aw_sq(l, m)?.sqrt())
}

pub fn aw2_filtered_sq(x: &FilteredGaussianProcess, y: &FilteredGaussianProcess) -> Result<f64> {
    x.factor.same_shape(&y.factor)?;
    Ok(mean_gap_sq(&x.mean, &y.mean)? + dist_aw_sq(&x.factor, &y.factor)?)
}

pub fn aw2_filtered(x: &FilteredGaussianProcess, y: &FilteredGaussianProcess) -> Result<f64> {
    Ok(aw2_filtered_sq(x, y)?.sqrt())
}

/// Squared AW₂ between 𝒩(a, A) and 𝒩(b, B) on (ℝ^d)^N, via minimal Cholesky factors.
pub fn aw2_gaussian_laws_sq(a: &Vector, cov_a: &Matrix, b: &Vector, cov_b: &Matrix, dim: usize) -> Result<f64> {
    check_cov_pair(cov_a, cov_b)?;
    let n = cov_a.nrows();
    if dim == 0 || n % dim != 0 {
        return Err(Error::Dimension(format!("size {n} is not a multiple of d = {dim}")));
    }
    if a.len() != n {
        return Err(Error::Dimension("mean and covariance sizes differ".into()));
    }
    let l = BlockLowerCholesky::new(minimal_cholesky(cov_a, PSD_TOL)?.factor, n / dim, dim)?;
    let m = BlockLowerCholesky::new(minimal_cholesky(cov_b, PSD_TOL)?.factor, n / dim, dim)?;
    Ok(mean_gap_sq(a, b)? + dist_aw_sq(&l, &m)?)
}

pub fn aw2_gaussian_laws(a: &Vector, cov_a: &Matrix, b: &Vector, cov_b: &Matrix, dim: usize) -> Result<f64> {
    Ok(aw2_gaussian_laws_sq(a, cov_a, b, cov_b, dim)?.sqrt())
}

/// Block-orthogonal `Q` with `M = LQ`, when `dist_AW(L, M) ≤ tol`.
pub fn aw_equivalence(l: &BlockLowerCholesky, m: &BlockLowerCholesky, tol: f64) -> Result<Option<Vec<Matrix>>> {
    if dist_aw(l, m)? > tol {
        return Ok(None);
    }
    // orthogonal polar factor U Vᵀ of (L_{·,t})ᵀ M_{·,t}
    let q: Vec<Matrix> = diagonal_cross_blocks(l, m)?
        .iter()
        .map(|c| canonical_trace_maximizer(&c.transpose()))
        .collect::<Result<_>>()?;
    let residual = (m.as_matrix() - l.mul_block_diag(&q)?.as_matrix()).norm();
    if residual <= tol * (1.0 + l.frobenius_sq().sqrt()) {
        Ok(Some(q))
    } else {
        Ok(None)
    }
}

/// Block-orthogonal minimizer of `‖L − MQ‖_F`.
#[derive(Debug, Clone)]
pub struct ProcrustesSolution {
    pub q: Vec<Matrix>,
    /// `‖L − MQ‖_F`
    pub achieved_value: f64,
}

pub fn procrustes_optimizer(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<ProcrustesSolution> {
    let q: Vec<Matrix> = diagonal_cross_blocks(l, m)?.iter().map(canonical_trace_maximizer).collect::<Result<_>>()?;
    let achieved_value = (l.as_matrix() - m.mul_block_diag(&q)?.as_matrix()).norm();
    Ok(ProcrustesSolution { q, achieved_value })
}

/// Point at time `u ∈ [0, 1]` on the constant-speed geodesic from X₀ to X₁,
/// `L̂_u = L₀ + u(L₁Q − L₀)` with the canonical Procrustes Q.
pub fn geodesic_point(
    x0: &FilteredGaussianProcess,
    x1: &FilteredGaussianProcess,
    u: f64,
) -> Result<FilteredGaussianProcess> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Range(format!("geodesic parameter u = {u} is outside [0, 1]")));
    }
    x0.factor.same_shape(&x1.factor)?;
    let sol = procrustes_optimizer(&x0.factor, &x1.factor)?;
    let aligned = x1.factor.mul_block_diag(&sol.q)?;
    let factor = x0.factor.lerp(&aligned, u)?;
    let mean = &x0.mean * (1.0 - u) + &x1.mean * u;
    FilteredGaussianProcess::new(mean, factor)
}

/// `Σ_t (N − t + 1) BW²(L_{t,t}L_{t,t}ᵀ, M_{t,t}M_{t,t}ᵀ)` for martingale factors;
/// equals `dist_AW²(L, M)`.
pub fn aw2_martingale_formula(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<f64> {
    l.same_shape(m)?;
    for (name, f) in [("L", l), ("M", m)] {
        let tol = 1e-9 * (1.0 + f.frobenius_sq().sqrt());
        if !factor_is_martingale(f, tol) {
            return Err(Error::Precondition(format!("{name} is not a martingale factor")));
        }
    }
    let n = l.n_steps();
    let mut total = 0.0;
    for t in 0..n {
        let (lt, mt) = (l.diag_block(t), m.diag_block(t));
        let bw = factor_bw_sq(&lt, &mt)?;
        total += (n - t) as f64 * bw;
    }
    Ok(total)
}
