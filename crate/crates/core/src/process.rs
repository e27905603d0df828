//! Filtered Gaussian processes `X = a + L ε` driven by white noise, where
//! `L ∈ 𝓛(N, d)` is block lower triangular with d×d blocks. Diagonal blocks
//! are arbitrary square matrices.
//!
//! Indices are 0-based: block `(s, t)` maps noise step `t` into time step `s`
//! and vanishes when `t > s`.

use nalgebra::linalg::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{default_rank_tol, ensure_finite, pseudo_inverse, Matrix, Vector};

/// Default tolerance for the structural tests.
pub const STRUCTURE_TOL: f64 = 1e-8;

/// An element of 𝓛(N, d), stored as a dense Nd×Nd matrix whose strictly
/// upper blocks are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLowerCholesky {
    n_steps: usize,
    dim: usize,
    matrix: Matrix,
}

impl BlockLowerCholesky {
    /// Validates shape, finiteness and exact zeros above the block diagonal.
    pub fn new(matrix: Matrix, n_steps: usize, dim: usize) -> Result<Self> {
        if n_steps == 0 || dim == 0 {
            return Err(Error::Dimension("N and d must be positive".into()));
        }
        let size = n_steps * dim;
        if matrix.shape() != (size, size) {
            return Err(Error::Dimension(format!(
                "factor must be {size}x{size} for N={n_steps}, d={dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        ensure_finite(&matrix, "factor")?;
        for s in 0..n_steps {
            for t in (s + 1)..n_steps {
                let blk = matrix.view((s * dim, t * dim), (dim, dim));
                if blk.iter().any(|&x| x != 0.0) {
                    return Err(Error::Precondition(format!(
                        "block ({}, {}) above the block diagonal is nonzero",
                        s + 1,
                        t + 1
                    )));
                }
            }
        }
        Ok(Self { n_steps, dim, matrix })
    }

    /// Scalar (d = 1) factor from a square lower-triangular matrix.
    pub fn scalar(matrix: Matrix) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, n, 1)
    }

    pub fn zeros(n_steps: usize, dim: usize) -> Self {
        let size = n_steps * dim;
        Self { n_steps, dim, matrix: Matrix::zeros(size, size) }
    }

    pub fn identity(n_steps: usize, dim: usize) -> Self {
        let size = n_steps * dim;
        Self { n_steps, dim, matrix: Matrix::identity(size, size) }
    }

    /// Builds the factor from a block generator called for every `s ≥ t`.
    pub fn from_blocks(n_steps: usize, dim: usize, mut f: impl FnMut(usize, usize) -> Matrix) -> Result<Self> {
        let mut out = Self::zeros(n_steps, dim);
        for s in 0..n_steps {
            for t in 0..=s {
                out.set_block(s, t, &f(s, t))?;
            }
        }
        ensure_finite(&out.matrix, "factor")?;
        Ok(out)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nd
    pub fn size(&self) -> usize {
        self.n_steps * self.dim
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn block(&self, s: usize, t: usize) -> Matrix {
        let d = self.dim;
        self.matrix.view((s * d, t * d), (d, d)).into_owned()
    }

    /// Writes a block with `s ≥ t`.
    pub fn set_block(&mut self, s: usize, t: usize, value: &Matrix) -> Result<()> {
        let d = self.dim;
        if t > s || s >= self.n_steps {
            return Err(Error::Range(format!("block ({}, {}) is not in the lower part", s + 1, t + 1)));
        }
        if value.shape() != (d, d) {
            return Err(Error::Dimension(format!("block must be {d}x{d}")));
        }
        self.matrix.view_mut((s * d, t * d), (d, d)).copy_from(value);
        Ok(())
    }

    pub fn diag_block(&self, t: usize) -> Matrix {
        self.block(t, t)
    }

    /// Column block `L_{·,t}` restricted to its nonzero rows (steps t..N).
    pub fn column_block(&self, t: usize) -> Matrix {
        let d = self.dim;
        self.matrix.view((t * d, t * d), (self.size() - t * d, d)).into_owned()
    }

    /// Row block `[L_{s,0} … L_{s,s}]`, d × (s+1)d.
    pub fn row_prefix(&self, s: usize) -> Matrix {
        let d = self.dim;
        self.matrix.view((s * d, 0), (d, (s + 1) * d)).into_owned()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.norm_squared()
    }

    /// `L · diag(Q₁, …, Q_N)`.
    pub fn mul_block_diag(&self, q: &[Matrix]) -> Result<Self> {
        let d = self.dim;
        if q.len() != self.n_steps || q.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::Dimension(format!("expected {} blocks of size {d}x{d}", self.n_steps)));
        }
        let mut out = self.clone();
        for (t, qt) in q.iter().enumerate() {
            let col = self.column_block(t) * qt;
            out.matrix.view_mut((t * d, t * d), (col.nrows(), d)).copy_from(&col);
        }
        Ok(out)
    }

    /// Leading `n` time steps.
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_steps {
            return Err(Error::Range(format!("leading horizon {n} not in 1..={}", self.n_steps)));
        }
        let size = n * self.dim;
        Ok(Self { n_steps: n, dim: self.dim, matrix: self.matrix.view((0, 0), (size, size)).into_owned() })
    }

    pub fn covariance(&self) -> Matrix {
        &self.matrix * self.matrix.transpose()
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_steps != other.n_steps || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "factors have (N, d) = ({}, {}) and ({}, {})",
                self.n_steps, self.dim, other.n_steps, other.dim
            )));
        }
        Ok(())
    }

    /// Entrywise affine combination `(1−u)·self + u·other`.
    pub fn lerp(&self, other: &Self, u: f64) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { n_steps: self.n_steps, dim: self.dim, matrix: &self.matrix * (1.0 - u) + &other.matrix * u })
    }
}

/// Mean `a ∈ ℝ^{Nd}` and factor `L`; law 𝒩(a, LLᵀ).
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredGaussianProcess {
    pub mean: Vector,
    pub factor: BlockLowerCholesky,
}

impl FilteredGaussianProcess {
    pub fn new(mean: Vector, factor: BlockLowerCholesky) -> Result<Self> {
        if mean.len() != factor.size() {
            return Err(Error::Dimension(format!("mean has length {}, factor has size {}", mean.len(), factor.size())));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mean".into()));
        }
        Ok(Self { mean, factor })
    }

    pub fn centered(factor: BlockLowerCholesky) -> Self {
        Self { mean: Vector::zeros(factor.size()), factor }
    }

    pub fn n_steps(&self) -> usize {
        self.factor.n_steps()
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn mean_block(&self, t: usize) -> Vector {
        let d = self.dim();
        self.mean.rows(t * d, d).into_owned()
    }

    pub fn covariance(&self) -> Matrix {
        self.factor.covariance()
    }
}

/// Per-step transitions `Φ_t` with `[L_{t+1,0..t}] ≈ Φ_t [L_{t,0..t}]`.
#[derive(Debug, Clone)]
pub struct MarkovTransition {
    pub transitions: Vec<Matrix>,
    pub residuals: Vec<f64>,
}

/// All mean blocks equal and `L_{t,t} = L_{t+1,t} = … = L_{N,t}` within tol.
pub fn is_martingale(x: &FilteredGaussianProcess, tol: f64) -> bool {
    let n = x.n_steps();
    let a0 = x.mean_block(0);
    if (1..n).any(|t| (x.mean_block(t) - &a0).norm() > tol) {
        return false;
    }
    factor_is_martingale(&x.factor, tol)
}

/// Martingale structure of the factor alone.
pub fn factor_is_martingale(l: &BlockLowerCholesky, tol: f64) -> bool {
    let n = l.n_steps();
    (0..n).all(|t| {
        let diag = l.diag_block(t);
        ((t + 1)..n).all(|s| (l.block(s, t) - &diag).norm() <= tol)
    })
}

/// Least-squares Markov test. Φ_t is the minimum-norm solution, so rows with
/// degenerate noise loadings still yield a deterministic transition.
pub fn is_markov(x: &FilteredGaussianProcess, tol: f64) -> (bool, MarkovTransition) {
    let l = &x.factor;
    let n = l.n_steps();
    let threshold = tol * (1.0 + l.frobenius_sq().sqrt());
    let mut transitions = Vec::with_capacity(n.saturating_sub(1));
    let mut residuals = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let a = l.row_prefix(t);
        let b = l.matrix.view(((t + 1) * l.dim, 0), (l.dim, (t + 1) * l.dim)).into_owned();
        let pinv = pseudo_inverse(&a, default_rank_tol(a.ncols())).expect("factor entries are finite");
        let phi = &b * pinv;
        residuals.push((&phi * &a - &b).norm());
        transitions.push(phi);
    }
    let ok = residuals.iter().all(|&r| r <= threshold);
    (ok, MarkovTransition { transitions, residuals })
}

/// Nearest martingale factor with `Q = I`: each column block is replaced by
/// its average over steps `s ≥ t`.
pub fn martingale_projection(l: &BlockLowerCholesky) -> BlockLowerCholesky {
    let n = l.n_steps();
    let d = l.dim();
    let mut out = BlockLowerCholesky::zeros(n, d);
    for t in 0..n {
        let mut avg = Matrix::zeros(d, d);
        for s in t..n {
            avg += l.block(s, t);
        }
        avg /= (n - t) as f64;
        for s in t..n {
            out.set_block(s, t, &avg).expect("index in range");
        }
    }
    out
}

/// Frobenius-nearest factor with common dynamics `M_{t,s} = Φ_{t−1}⋯Φ_s M_{s,s}`.
pub fn common_dynamics_projection(l: &BlockLowerCholesky, phi: &[Matrix]) -> Result<BlockLowerCholesky> {
    let n = l.n_steps();
    let d = l.dim();
    if phi.len() != n - 1 {
        return Err(Error::Dimension(format!("expected {} transition matrices, got {}", n - 1, phi.len())));
    }
    for p in phi {
        if p.shape() != (d, d) {
            return Err(Error::Dimension(format!("transition matrices must be {d}x{d}")));
        }
        ensure_finite(p, "transition matrix")?;
    }
    let mut out = BlockLowerCholesky::zeros(n, d);
    for s in 0..n {
        // gains[k] = G_{s+k, s}
        let mut gains = vec![Matrix::identity(d, d)];
        for p in &phi[s..n - 1] {
            let next = p * gains.last().unwrap();
            gains.push(next);
        }
        let mut gram = Matrix::zeros(d, d);
        let mut rhs = Matrix::zeros(d, d);
        for (k, g) in gains.iter().enumerate() {
            gram += g.transpose() * g;
            rhs += g.transpose() * l.block(s + k, s);
        }
        // gram ⪰ I, so the Cholesky solve cannot fail on finite input
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::Consistency("normal equations of the common-dynamics fit are not positive definite".into())
        })?;
        let free = chol.solve(&rhs);
        for (k, g) in gains.iter().enumerate() {
            out.set_block(s + k, s, &(g * &free))?;
        }
    }
    ensure_finite(out.as_matrix(), "common-dynamics projection")?;
    Ok(out)
}

/// `n` sampled paths as the rows of an n × Nd matrix.
pub fn sample_paths(x: &FilteredGaussianProcess, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Range("number of paths must be at least 1".into()));
    }
    let size = x.factor.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Matrix::from_fn(n, size, |_, _| StandardNormal.sample(&mut rng));
    Ok(add_mean_rows(noise * x.factor.as_matrix().transpose(), &x.mean))
}

pub(crate) fn add_mean_rows(mut paths: Matrix, mean: &Vector) -> Matrix {
    for mut row in paths.row_iter_mut() {
        row += mean.transpose();
    }
    paths
}
