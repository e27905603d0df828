#![allow(dead_code)]

use adapted_ot::linalg::{Matrix, Vector};
use adapted_ot::process::BlockLowerCholesky;

pub fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

pub fn sq(n: usize, data: &[f64]) -> Matrix {
    mat(n, n, data)
}

/// d = 1 factor from a row-major lower-triangular matrix.
pub fn scalar_factor(n: usize, data: &[f64]) -> BlockLowerCholesky {
    BlockLowerCholesky::scalar(sq(n, data)).unwrap()
}

pub fn factor(n_steps: usize, dim: usize, data: &[f64]) -> BlockLowerCholesky {
    let size = n_steps * dim;
    BlockLowerCholesky::new(sq(size, data), n_steps, dim).unwrap()
}

pub fn zeros(n: usize) -> Vector {
    Vector::zeros(n)
}

#[track_caller]
pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got}, want {want} (tol {tol})");
}

#[track_caller]
pub fn assert_mat_close(got: &Matrix, want: &Matrix, tol: f64) {
    assert_eq!(got.shape(), want.shape());
    let diff = (got - want).amax();
    assert!(diff <= tol, "max entry difference {diff} > {tol}\n got {got}\n want {want}");
}

/// `L(θ) = [[0, 0], [cos θ, sin θ]]`: every angle gives covariance diag(0, 1).
pub fn angle_factor(theta: f64) -> BlockLowerCholesky {
    scalar_factor(2, &[0.0, 0.0, theta.cos(), theta.sin()])
}

/// All 2^n sign vectors.
pub fn sign_patterns(n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u32..(1 << n)).map(move |mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
}

/// Random factor where some columns only switch on at a later block, so the
/// covariance admits factors other than its minimal one.
pub fn delayed_factor<R: rand::Rng>(rng: &mut R, n_steps: usize, dim: usize) -> BlockLowerCholesky {
    let l = adapted_ot::random::factor(rng, n_steps, dim, 0.3);
    let mut m = l.into_matrix();
    for j in 0..n_steps * dim {
        let own = j / dim;
        if own + 1 < n_steps && rng.gen::<f64>() < 0.4 {
            let start = rng.gen_range(own + 1..n_steps) * dim;
            for i in 0..start {
                m[(i, j)] = 0.0;
            }
        }
    }
    BlockLowerCholesky::new(m, n_steps, dim).unwrap()
}

/// Another factor of the same covariance: random rotations of column pairs
/// that keep the block-lower shape, then a block-orthogonal right factor.
pub fn alternative_factor<R: rand::Rng>(rng: &mut R, l: &BlockLowerCholesky) -> BlockLowerCholesky {
    let (n, d) = (l.n_steps(), l.dim());
    let size = n * d;
    let mut m = l.as_matrix().clone();
    for _ in 0..size {
        let (j, k) = (rng.gen_range(0..size), rng.gen_range(0..size));
        if j == k {
            continue;
        }
        // column j may mix into column k when it vanishes above k's block
        let start = (k / d) * d;
        if (0..start).any(|i| m[(i, j)] != 0.0) || (0..(j / d) * d).any(|i| m[(i, k)] != 0.0) {
            continue;
        }
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (c, s) = (th.cos(), th.sin());
        let (cj, ck) = (m.column(j).clone_owned(), m.column(k).clone_owned());
        m.set_column(j, &(&cj * c - &ck * s));
        m.set_column(k, &(&cj * s + &ck * c));
    }
    let out = BlockLowerCholesky::new(m, n, d).unwrap();
    let q = adapted_ot::random::block_orthogonal(rng, n, d);
    out.mul_block_diag(&q).unwrap()
}
