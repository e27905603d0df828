//! Minimal Cholesky factors of positive semidefinite matrices, the
//! chronological inverse, and the lower-triangular representative of a
//! block factor.
//!
//! The minimal factor of A is the unique lower-triangular `L` with
//! non-negative diagonal, `LLᵀ = A`, and `L[·, i] = 0` whenever `L[i, i] = 0`.
//! It is computed by the Schur-complement recursion without pivoting, so the
//! chronological order of coordinates is kept. When rounding makes a pivot
//! decision unreliable (a tiny earlier pivot amplifies errors), the factor is
//! rebuilt by orthogonalizing the rows of an eigen square root of A in order.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, qr_nonneg, sqrt_eigenvalues, symmetric_eigen, Matrix};
use crate::process::BlockLowerCholesky;

/// Default relative pivot threshold.
pub const PSD_TOL: f64 = 1e-12;

/// Safety factor on the first-order rounding sensitivity of each pivot.
const SENSITIVITY_SAFETY: f64 = 4.0;

/// Relative tolerance on `max |A − Aᵀ|`.
pub const SYM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalCholesky {
    pub factor: Matrix,
    /// Indices with a positive diagonal entry, ascending.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronologicalInverse {
    pub matrix: Matrix,
}

pub fn minimal_cholesky(a: &Matrix, psd_tol: f64) -> Result<MinimalCholesky> {
    ensure_square(a, "covariance")?;
    ensure_finite(a, "covariance")?;
    if !(psd_tol >= 0.0) {
        return Err(Error::Range(format!("psd_tol must be >= 0, got {psd_tol}")));
    }
    let entry_scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = crate::linalg::asymmetry(a);
    if asym > SYM_TOL * entry_scale {
        return Err(Error::NotSymmetric(asym));
    }
    match schur_recursion(a, psd_tol)? {
        Some(mc) => Ok(mc),
        None => row_orthogonalization(a, psd_tol),
    }
}

/// Returns `None` when some pivot is within its rounding noise of the
/// zero threshold.
fn schur_recursion(a: &Matrix, psd_tol: f64) -> Result<Option<MinimalCholesky>> {
    let n = a.nrows();
    let entry_scale = a.amax().max(f64::MIN_POSITIVE);
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let floor = psd_tol * scale;
    let abs_floor = 64.0 * f64::EPSILON * entry_scale;
    // A rounding error δA moves the pivot at k by about wᵀ δA w with
    // w = A_II⁻¹ a_Ik (I the earlier active indices).
    let unit = SENSITIVITY_SAFETY * n as f64 * f64::EPSILON * scale;

    // lower triangle of the running Schur complement
    let mut s = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            s[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut l = Matrix::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    // inverse of l[active, active], indexed by position in `active`
    let mut inv = Matrix::zeros(n, n);
    let sensitivity = |row: usize, l: &Matrix, inv: &Matrix, active: &[usize]| -> f64 {
        let r = active.len();
        let w1: f64 = (0..r).map(|b| (b..r).map(|c| inv[(c, b)] * l[(row, active[c])]).sum::<f64>().abs()).sum();
        1.0 + w1
    };
    for k in 0..n {
        let p = s[(k, k)];
        let gk = sensitivity(k, &l, &inv, &active);
        let noise = unit * gk * gk;
        if noise > floor && p.abs() <= 16.0 * noise {
            return Ok(None);
        }
        if p <= floor {
            if p < -floor {
                return Err(Error::NotPsd(format!("pivot {p:e} at index {k} is negative")));
            }
            // Cauchy–Schwarz: |s_ik|² ≤ s_ii s_kk
            let cs = (scale * (p.max(0.0) + floor)).sqrt() * (1.0 + 1e-8) + abs_floor;
            for i in (k + 1)..n {
                let v = s[(i, k)].abs();
                if v > cs {
                    if v <= cs + 16.0 * unit * gk * sensitivity(i, &l, &inv, &active) {
                        return Ok(None);
                    }
                    return Err(Error::NotPsd(format!("entry ({i}, {k}) is nonzero next to a vanishing pivot")));
                }
            }
            continue;
        }
        let root = p.sqrt();
        l[(k, k)] = root;
        for i in (k + 1)..n {
            l[(i, k)] = s[(i, k)] / root;
        }
        for j in (k + 1)..n {
            let ljk = l[(j, k)];
            if ljk == 0.0 {
                continue;
            }
            for i in j..n {
                s[(i, j)] -= l[(i, k)] * ljk;
            }
        }
        // extend the inverse by the new row [l_kI, root]
        let r = active.len();
        for c in 0..r {
            let acc: f64 = (c..r).map(|b| l[(k, active[b])] * inv[(b, c)]).sum();
            inv[(r, c)] = -acc / root;
        }
        inv[(r, r)] = 1.0 / root;
        active.push(k);
    }
    Ok(Some(MinimalCholesky { factor: l, active }))
}

/// With `A = F Fᵀ` from the eigendecomposition, row k of L holds the
/// coordinates of row k of F in the orthonormal basis built from the rows
/// before it; the residual norm is the pivot.
fn row_orthogonalization(a: &Matrix, psd_tol: f64) -> Result<MinimalCholesky> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let eig = symmetric_eigen(a)?;
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let eig_tol = psd_tol.max(64.0 * n as f64 * f64::EPSILON) * scale;
    if lambda_min < -eig_tol {
        return Err(Error::NotPsd(format!("smallest eigenvalue {lambda_min:e} is negative")));
    }
    // eigenvalues at rounding level are cut to zero, so F has the numerical rank
    let mut f = eig.eigenvectors.clone();
    for (j, s) in sqrt_eigenvalues(&eig.eigenvalues).into_iter().enumerate() {
        f.column_mut(j).scale_mut(s);
    }
    let floor = psd_tol * scale;
    let mut basis: Vec<crate::linalg::Vector> = Vec::new();
    let mut l = Matrix::zeros(n, n);
    let mut active = Vec::new();
    for k in 0..n {
        let mut r = f.row(k).transpose();
        let mut coef = vec![0.0; basis.len()];
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for (c, q) in coef.iter_mut().zip(&basis) {
                let h = q.dot(&r);
                *c += h;
                r.axpy(-h, q, 1.0);
            }
        }
        for (c, &j) in coef.iter().zip(&active) {
            l[(k, j)] = *c;
        }
        let norm = r.norm();
        if norm * norm > floor {
            l[(k, k)] = norm;
            basis.push(r / norm);
            active.push(k);
        }
    }
    Ok(MinimalCholesky { factor: l, active })
}

/// `L^⊖ = E (L_[𝓘,𝓘])⁻¹ Eᵀ`.
pub fn chronological_inverse(mc: &MinimalCholesky) -> ChronologicalInverse {
    let n = mc.factor.nrows();
    let k = mc.active.len();
    let sub = Matrix::from_fn(k, k, |i, j| mc.factor[(mc.active[i], mc.active[j])]);
    // forward substitution column by column; sub is lower triangular with positive diagonal
    let mut inv = Matrix::zeros(k, k);
    for c in 0..k {
        for i in c..k {
            let mut acc = if i == c { 1.0 } else { 0.0 };
            for j in c..i {
                acc -= sub[(i, j)] * inv[(j, c)];
            }
            inv[(i, c)] = acc / sub[(i, i)];
        }
    }
    let mut out = Matrix::zeros(n, n);
    for (a, &i) in mc.active.iter().enumerate() {
        for (b, &j) in mc.active.iter().enumerate() {
            out[(i, j)] = inv[(a, b)];
        }
    }
    ChronologicalInverse { matrix: out }
}

/// `L̃ = L Q` with `Q` block orthogonal and `L̃` lower triangular with
/// non-negative diagonal. Returns `(L̃, [Q₁, …, Q_N])`.
pub fn canonical_block_lower(l: &BlockLowerCholesky) -> (BlockLowerCholesky, Vec<Matrix>) {
    let q: Vec<Matrix> = (0..l.n_steps())
        .map(|t| {
            let (q, _) = qr_nonneg(&l.diag_block(t).transpose()).expect("finite square block");
            q
        })
        .collect();
    let mut out = l.mul_block_diag(&q).expect("shapes match");
    // zero the rounding residue above the diagonal of each diagonal block
    let d = l.dim();
    let mut m = out.as_matrix().clone();
    for t in 0..l.n_steps() {
        for i in 0..d {
            for j in (i + 1)..d {
                m[(t * d + i, t * d + j)] = 0.0;
            }
        }
    }
    out = BlockLowerCholesky::new(m, l.n_steps(), d).expect("still block lower");
    (out, q)
}
