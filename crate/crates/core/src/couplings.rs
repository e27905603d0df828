//! Gaussian couplings of two filtered processes.
//!
//! A bicausal Gaussian coupling pairs the driving noises step by step, with
//! `P_t = E[ε^Y_t (ε^X_t)ᵀ]` a contraction. Its cost is
//!
//! ```text
//! ‖a − b‖² + ‖L‖² + ‖M‖² − 2 Σ_t tr((LᵀM)_{t,t} P_t)
//! ```
//!
//! The classical Brenier coupling uses one full Nd×Nd correlation instead and
//! is not bicausal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    canonical_trace_maximizer, default_rank_tol, ensure_finite, nuclear_norm, numerical_rank, spectral_norm, svd,
    symmetric_eigen, Matrix,
};
use crate::metrics::{clamp_radicand, diagonal_cross_blocks};
use crate::process::{add_mean_rows, BlockLowerCholesky, FilteredGaussianProcess};

/// Slack on `‖P_t‖₂ ≤ 1`.
pub const CORRELATION_TOL: f64 = 1e-9;

/// Block-diagonal correlation `diag(P₁, …, P_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCorrelation {
    blocks: Vec<Matrix>,
}

impl BlockCorrelation {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let d = blocks.first().map(|b| b.nrows()).ok_or_else(|| Error::Dimension("no blocks".into()))?;
        for (t, b) in blocks.iter().enumerate() {
            if b.shape() != (d, d) {
                return Err(Error::Dimension(format!("correlation block {} is not {d}x{d}", t + 1)));
            }
            ensure_finite(b, "correlation block")?;
            if spectral_norm(b)? > 1.0 + CORRELATION_TOL {
                return Err(Error::Precondition(format!("correlation block {} is not a contraction", t + 1)));
            }
        }
        Ok(Self { blocks })
    }

    /// Synchronous coupling.
    pub fn identity(n_steps: usize, dim: usize) -> Self {
        Self { blocks: vec![Matrix::identity(dim, dim); n_steps] }
    }

    /// Independent coupling.
    pub fn zeros(n_steps: usize, dim: usize) -> Self {
        Self { blocks: vec![Matrix::zeros(dim, dim); n_steps] }
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn n_steps(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn to_matrix(&self) -> Matrix {
        let d = self.dim();
        let size = d * self.n_steps();
        let mut out = Matrix::zeros(size, size);
        for (t, b) in self.blocks.iter().enumerate() {
            out.view_mut((t * d, t * d), (d, d)).copy_from(b);
        }
        out
    }

    fn check_against(&self, l: &BlockLowerCholesky) -> Result<()> {
        if self.n_steps() != l.n_steps() || self.dim() != l.dim() {
            return Err(Error::Dimension(format!(
                "correlation has (N, d) = ({}, {}), factors have ({}, {})",
                self.n_steps(),
                self.dim(),
                l.n_steps(),
                l.dim()
            )));
        }
        Ok(())
    }
}

/// Full Nd×Nd correlation. Couplings built from it are not bicausal.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCorrelation {
    pub matrix: Matrix,
}

impl FullCorrelation {
    pub fn new(matrix: Matrix) -> Result<Self> {
        crate::linalg::ensure_square(&matrix, "correlation")?;
        ensure_finite(&matrix, "correlation")?;
        if spectral_norm(&matrix)? > 1.0 + CORRELATION_TOL {
            return Err(Error::Precondition("correlation is not a contraction".into()));
        }
        Ok(Self { matrix })
    }

    pub fn is_bicausal(&self) -> bool {
        false
    }
}

/// Cost of the bicausal coupling with correlation P (squared scale).
pub fn coupling_cost(x: &FilteredGaussianProcess, y: &FilteredGaussianProcess, p: &BlockCorrelation) -> Result<f64> {
    if x.mean.len() != y.mean.len() {
        return Err(Error::Dimension("means have different lengths".into()));
    }
    Ok((&x.mean - &y.mean).norm_squared() + factor_coupling_cost(&x.factor, &y.factor, p)?)
}

/// Coupling cost for centered processes.
pub fn factor_coupling_cost(l: &BlockLowerCholesky, m: &BlockLowerCholesky, p: &BlockCorrelation) -> Result<f64> {
    p.check_against(l)?;
    let cross: f64 = diagonal_cross_blocks(l, m)?.iter().zip(p.blocks()).map(|(g, pt)| (g * pt).trace()).sum();
    Ok(l.frobenius_sq() + m.frobenius_sq() - 2.0 * cross)
}

/// `P_t` = canonical member of 𝒫((LᵀM)_{t,t}).
pub fn optimal_aw_correlation(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<BlockCorrelation> {
    let blocks = diagonal_cross_blocks(l, m)?.iter().map(canonical_trace_maximizer).collect::<Result<Vec<_>>>()?;
    Ok(BlockCorrelation { blocks })
}

/// Canonical member of 𝒫(LᵀM) over the full path space.
pub fn classical_brenier_correlation(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<FullCorrelation> {
    l.same_shape(m)?;
    let matrix = canonical_trace_maximizer(&(l.as_matrix().transpose() * m.as_matrix()))?;
    Ok(FullCorrelation { matrix })
}

/// `‖L‖² + ‖M‖² − 2 tr(LᵀM P)` for a full correlation.
pub fn full_coupling_cost(l: &BlockLowerCholesky, m: &BlockLowerCholesky, p: &FullCorrelation) -> Result<f64> {
    l.same_shape(m)?;
    if p.matrix.nrows() != l.size() {
        return Err(Error::Dimension("correlation size differs from factor size".into()));
    }
    let cross = (l.as_matrix().transpose() * m.as_matrix() * &p.matrix).trace();
    Ok(l.frobenius_sq() + m.frobenius_sq() - 2.0 * cross)
}

/// Adapted Brenier coupling and its per-step optimal traces.
#[derive(Debug, Clone)]
pub struct AdaptedBrenier {
    pub correlation: BlockCorrelation,
    /// `Γ_t = tr((LᵀM)_{t,t} P_t)`
    pub gammas: Vec<f64>,
    /// Rank of `L_{t,t}ᵀ M_{t,t}`.
    pub ranks: Vec<usize>,
    /// `D_AB = ‖L‖² + ‖M‖² − 2 Σ Γ_t`
    pub divergence: f64,
}

/// Minimal-cost adapted Brenier coupling with the default rank tolerance.
pub fn adapted_brenier(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<AdaptedBrenier> {
    adapted_brenier_with_tol(l, m, default_rank_tol(l.dim()))
}

pub fn adapted_brenier_with_tol(
    l: &BlockLowerCholesky,
    m: &BlockLowerCholesky,
    rank_tol: f64,
) -> Result<AdaptedBrenier> {
    if !(rank_tol >= 0.0) {
        return Err(Error::Range(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    let cross = diagonal_cross_blocks(l, m)?;
    let mut blocks = Vec::with_capacity(cross.len());
    let mut gammas = Vec::with_capacity(cross.len());
    let mut ranks = Vec::with_capacity(cross.len());
    for (t, g) in cross.iter().enumerate() {
        let c = l.diag_block(t).transpose() * m.diag_block(t);
        let dec = svd(&c)?;
        let d = c.nrows();
        let r = numerical_rank(&dec.singular_values, rank_tol);
        let (u1, u0) = (dec.u.columns(0, r), dec.u.columns(r, d - r));
        let (v1, v0) = (dec.v.columns(0, r), dec.v.columns(r, d - r));
        let mut p = v1 * u1.transpose();
        let mut gamma = (u1.transpose() * g * v1).trace();
        if r < d {
            let free = u0.transpose() * g * v0;
            let k = canonical_trace_maximizer(&free)?;
            p += v0 * k * u0.transpose();
            gamma += nuclear_norm(&free)?;
        }
        blocks.push(p);
        gammas.push(gamma);
        ranks.push(r);
    }
    let scale = l.frobenius_sq() + m.frobenius_sq();
    let divergence = clamp_radicand(scale - 2.0 * gammas.iter().sum::<f64>(), scale)?;
    Ok(AdaptedBrenier { correlation: BlockCorrelation { blocks }, gammas, ranks, divergence })
}

pub fn adapted_brenier_correlation(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<BlockCorrelation> {
    Ok(adapted_brenier(l, m)?.correlation)
}

pub fn adapted_brenier_divergence(l: &BlockLowerCholesky, m: &BlockLowerCholesky) -> Result<f64> {
    Ok(adapted_brenier(l, m)?.divergence)
}

/// True iff some adapted Brenier coupling is AW-optimal, i.e.
/// `Γ_t = ‖(LᵀM)_{t,t}‖_*` for every t.
pub fn ab_attains_aw(l: &BlockLowerCholesky, m: &BlockLowerCholesky, tol: f64) -> Result<bool> {
    ab_attains_aw_with_tol(l, m, tol, default_rank_tol(l.dim()))
}

pub fn ab_attains_aw_with_tol(l: &BlockLowerCholesky, m: &BlockLowerCholesky, tol: f64, rank_tol: f64) -> Result<bool> {
    let ab = adapted_brenier_with_tol(l, m, rank_tol)?;
    let cross = diagonal_cross_blocks(l, m)?;
    for (g, gamma) in cross.iter().zip(&ab.gammas) {
        if (nuclear_norm(g)? - gamma).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(I − P Pᵀ)^{1/2}`; fails if the argument is indefinite beyond rounding.
fn residual_root(p: &Matrix) -> Result<Matrix> {
    let n = p.nrows();
    let eig = symmetric_eigen(&(Matrix::identity(n, n) - p * p.transpose()))?;
    let mut q = eig.eigenvectors.clone();
    for j in 0..n {
        let ev = eig.eigenvalues[j];
        if ev < -CORRELATION_TOL {
            return Err(Error::Precondition("I − P Pᵀ is indefinite; P is not a contraction".into()));
        }
        q.column_mut(j).scale_mut(ev.max(0.0).sqrt());
    }
    Ok(q * eig.eigenvectors.transpose())
}

/// Draws `(ε^X, ε^Y)` for n samples with `E[ε^Y (ε^X)ᵀ]` block diagonal with
/// the given blocks: `ε^Y = P ε^X + (I − PPᵀ)^{1/2} η`.
fn correlated_noise(blocks: &[Matrix], n: usize, seed: u64) -> Result<(Matrix, Matrix)> {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = Matrix::from_fn(n, size, |_, _| StandardNormal.sample(&mut rng));
    let eta = Matrix::from_fn(n, size, |_, _| StandardNormal.sample(&mut rng));
    let mut ey = Matrix::zeros(n, size);
    let mut off = 0;
    for p in blocks {
        let k = p.nrows();
        let root = residual_root(p)?;
        // rows are samples, so apply transposed maps on the right
        let part = ex.columns(off, k) * p.transpose() + eta.columns(off, k) * root.transpose();
        ey.columns_mut(off, k).copy_from(&part);
        off += k;
    }
    Ok((ex, ey))
}

fn check_sampling(x: &FilteredGaussianProcess, y: &FilteredGaussianProcess, n: usize) -> Result<()> {
    x.factor.same_shape(&y.factor)?;
    if n == 0 {
        return Err(Error::Range("number of samples must be at least 1".into()));
    }
    Ok(())
}

/// n paired paths (rows) from the bicausal coupling with correlation P.
pub fn sample_coupled_paths(
    x: &FilteredGaussianProcess,
    y: &FilteredGaussianProcess,
    p: &BlockCorrelation,
    n: usize,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    check_sampling(x, y, n)?;
    p.check_against(&x.factor)?;
    let (ex, ey) = correlated_noise(p.blocks(), n, seed)?;
    Ok(synthesize(x, y, ex, ey))
}

/// n paired paths from a full (non-bicausal) correlation.
pub fn sample_full_coupled_paths(
    x: &FilteredGaussianProcess,
    y: &FilteredGaussianProcess,
    p: &FullCorrelation,
    n: usize,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    check_sampling(x, y, n)?;
    if p.matrix.nrows() != x.factor.size() {
        return Err(Error::Dimension("correlation size differs from factor size".into()));
    }
    let (ex, ey) = correlated_noise(std::slice::from_ref(&p.matrix), n, seed)?;
    Ok(synthesize(x, y, ex, ey))
}

fn synthesize(x: &FilteredGaussianProcess, y: &FilteredGaussianProcess, ex: Matrix, ey: Matrix) -> (Matrix, Matrix) {
    let px = add_mean_rows(ex * x.factor.as_matrix().transpose(), &x.mean);
    let py = add_mean_rows(ey * y.factor.as_matrix().transpose(), &y.mean);
    (px, py)
}

/// Sample mean and standard error of `‖X − Y‖²` over paired rows.
pub fn empirical_cost(px: &Matrix, py: &Matrix) -> (f64, f64) {
    let costs: Vec<f64> = (px - py).row_iter().map(|r| r.norm_squared()).collect();
    mean_and_se(&costs)
}

/// Mean and standard error; the error is infinite for a single sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
