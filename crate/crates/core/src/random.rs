//! Random test instances: Gaussian matrices, block factors, orthogonal
//! blocks, contractions and PSD matrices.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{qr_nonneg, spectral_norm, Matrix};
use crate::process::BlockLowerCholesky;

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut *rng))
}

/// Haar-distributed orthogonal matrix.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    qr_nonneg(&g).expect("finite square input").0
}

pub fn block_orthogonal<R: Rng + ?Sized>(rng: &mut R, n_steps: usize, dim: usize) -> Vec<Matrix> {
    (0..n_steps).map(|_| orthogonal(rng, dim)).collect()
}

/// Gaussian matrix rescaled to spectral norm drawn uniformly from [0, 1].
pub fn contraction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    let s = spectral_norm(&g).expect("finite input");
    if s == 0.0 {
        return g;
    }
    g * (rng.gen::<f64>() / s)
}

/// Factor with Gaussian lower blocks. With probability `p_degenerate` each
/// diagonal block is replaced by a random rank-deficient one.
pub fn factor<R: Rng + ?Sized>(rng: &mut R, n_steps: usize, dim: usize, p_degenerate: f64) -> BlockLowerCholesky {
    BlockLowerCholesky::from_blocks(n_steps, dim, |s, t| {
        if s == t && rng.gen::<f64>() < p_degenerate {
            let rank = rng.gen_range(0..dim);
            gaussian_matrix(rng, dim, rank) * gaussian_matrix(rng, rank, dim)
        } else {
            gaussian_matrix(rng, dim, dim)
        }
    })
    .expect("finite blocks")
}

/// Martingale factor: every column block repeats its diagonal block.
pub fn martingale_factor<R: Rng + ?Sized>(
    rng: &mut R,
    n_steps: usize,
    dim: usize,
    p_degenerate: f64,
) -> BlockLowerCholesky {
    let diag = factor(rng, n_steps, dim, p_degenerate);
    BlockLowerCholesky::from_blocks(n_steps, dim, |_, t| diag.diag_block(t)).expect("finite blocks")
}

/// `G Gᵀ` with G of size n × rank.
pub fn psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, rank);
    &g * g.transpose()
}

/// Lower triangular with non-negative diagonal and zero columns wherever the
/// diagonal vanishes.
pub fn minimal_factor<R: Rng + ?Sized>(rng: &mut R, n: usize, p_zero: f64) -> Matrix {
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        if rng.gen::<f64>() < p_zero {
            continue;
        }
        l[(j, j)] = rng.gen_range(0.5..2.0);
        for i in (j + 1)..n {
            l[(i, j)] = StandardNormal.sample(&mut *rng);
        }
    }
    l
}
