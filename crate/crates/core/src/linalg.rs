//! Dense kernels: SVD with a fixed sign convention, matrix norms, and the
//! trace-maximization set
//!
//! ```text
//! 𝒫(C) = argmax { tr(C P) : ‖P‖₂ ≤ 1 } = { V₁U₁ᵀ + V₀ K U₀ᵀ : ‖K‖₂ ≤ 1 }
//! ```
//!
//! where `C = U Σ Vᵀ` is split by rank into `[U₁ U₀]`, `[V₁ V₀]`. The optimal
//! value is always the nuclear norm `‖C‖_*`.
//!
//! Matrices are `nalgebra::DMatrix<f64>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SVD_MAX_ITER: usize = 10_000;

/// Default relative rank tolerance for an n×n matrix: `n · 2⁻⁴⁰`.
pub fn default_rank_tol(n: usize) -> f64 {
    n.max(1) as f64 * 2f64.powi(-40)
}

pub fn ensure_finite(c: &Matrix, what: &str) -> Result<()> {
    if c.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_square(c: &Matrix, what: &str) -> Result<()> {
    if c.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} must be square, got {}x{}", c.nrows(), c.ncols())))
    }
}

/// Thin singular value decomposition `C = U diag(σ) Vᵀ`.
///
/// For an m×n input, `u` is m×k and `v` is n×k with k = min(m, n); both are
/// square orthogonal when C is square. Singular values are descending and the
/// first entry of each left singular vector that is not negligible is
/// non-negative; for singular values at rounding level the same holds for
/// the right singular vector.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vector,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn descending_order(values: &Vector) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps the backend order among ties
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

pub fn svd(c: &Matrix) -> Result<Svd> {
    ensure_finite(c, "svd input")?;
    let (m, n) = c.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd { u: Matrix::zeros(m, 0), singular_values: Vector::zeros(0), v: Matrix::zeros(n, 0) });
    }
    let (u_raw, s_raw, v_raw) = match backend_svd(c) {
        Some(dec) if svd_is_accurate(c, &dec) => dec,
        // nalgebra can return wrong singular vectors when some singular
        // values are exactly zero
        _ => jacobi_svd(c)?,
    };
    let order = descending_order(&s_raw);
    let mut u = Matrix::zeros(m, k);
    let mut v = Matrix::zeros(n, k);
    let mut s = Vector::zeros(k);
    for (j, &src) in order.iter().enumerate() {
        s[j] = s_raw[src];
        u.set_column(j, &u_raw.column(src));
        v.set_column(j, &v_raw.column(src));
        let lead = u.column(j).iter().copied().find(|x| x.abs() > 1e-12);
        if matches!(lead, Some(x) if x < 0.0) {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    // for vanishing singular values u and v are unrelated; fix v's sign on its own
    let zero = 64.0 * f64::EPSILON * k as f64 * s.amax();
    for j in 0..k {
        if s[j] <= zero {
            let lead = v.column(j).iter().copied().find(|x| x.abs() > 1e-12);
            if matches!(lead, Some(x) if x < 0.0) {
                v.column_mut(j).neg_mut();
            }
        }
    }
    Ok(Svd { u, singular_values: s, v })
}

type RawSvd = (Matrix, Vector, Matrix);

fn backend_svd(c: &Matrix) -> Option<RawSvd> {
    let raw = c.clone().try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)?;
    let (u, v_t) = (raw.u?, raw.v_t?);
    let mut s = raw.singular_values;
    let mut v = v_t.transpose();
    for j in 0..s.len() {
        if s[j] < 0.0 {
            s[j] = -s[j];
            v.column_mut(j).neg_mut();
        }
    }
    Some((u, s, v))
}

fn orthonormal_error(q: &Matrix) -> f64 {
    (q.tr_mul(q) - Matrix::identity(q.ncols(), q.ncols())).amax()
}

fn svd_is_accurate(c: &Matrix, (u, s, v): &RawSvd) -> bool {
    let k = s.len();
    let tol = 1e3 * f64::EPSILON * k as f64;
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let mut us = u.clone();
    for j in 0..k {
        us.column_mut(j).scale_mut(s[j]);
    }
    let resid = (us * v.transpose() - c).amax();
    resid <= tol * scale && orthonormal_error(u) <= tol && orthonormal_error(v) <= tol
}

/// One-sided Jacobi SVD. Slower than the bidiagonal backend but reliable on
/// rank-deficient inputs.
fn jacobi_svd(c: &Matrix) -> Result<RawSvd> {
    if c.nrows() < c.ncols() {
        let (u, s, v) = jacobi_svd(&c.transpose())?;
        return Ok((v, s, u));
    }
    let (m, n) = c.shape();
    let mut a = c.clone();
    let mut v = Matrix::identity(n, n);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut a, p, q, cs, sn);
                rotate_columns(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence);
    }
    let s = Vector::from_fn(n, |j, _| a.column(j).norm());
    let smax = s.amax();
    let mut u = Matrix::zeros(m, n);
    let mut filled = Vec::with_capacity(n);
    for j in 0..n {
        if s[j] > smax * f64::EPSILON * n as f64 && s[j] > 0.0 {
            u.set_column(j, &(a.column(j) / s[j]));
            filled.push(j);
        }
    }
    // complete U with unit vectors orthogonalized against the filled columns
    let mut next_basis = 0;
    for j in 0..n {
        if filled.contains(&j) {
            continue;
        }
        loop {
            if next_basis == m {
                return Err(Error::NoConvergence);
            }
            let mut e = Vector::zeros(m);
            e[next_basis] = 1.0;
            next_basis += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = u.column(k).dot(&e);
                    e.axpy(-proj, &u.column(k), 1.0);
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                u.set_column(j, &(e / norm));
                filled.push(j);
                break;
            }
        }
    }
    Ok((u, s, v))
}

const JACOBI_MAX_SWEEPS: usize = 100;

fn rotate_columns(a: &mut Matrix, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..a.nrows() {
        let (x, y) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = cs * x - sn * y;
        a[(i, q)] = sn * x + cs * y;
    }
}

/// Singular values only, descending.
pub fn singular_values(c: &Matrix) -> Result<Vector> {
    ensure_finite(c, "svd input")?;
    if c.nrows() == 0 || c.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    let frob2 = c.norm_squared();
    let mut s: Vec<f64> = match c.clone().try_svd(false, false, f64::EPSILON, SVD_MAX_ITER) {
        Some(raw) if (raw.singular_values.norm_squared() - frob2).abs() <= 1e-10 * frob2 => {
            raw.singular_values.iter().map(|x| x.abs()).collect()
        }
        _ => jacobi_svd(c)?.1.iter().copied().collect(),
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(s))
}

pub fn nuclear_norm(c: &Matrix) -> Result<f64> {
    Ok(singular_values(c)?.sum())
}

pub fn spectral_norm(c: &Matrix) -> Result<f64> {
    Ok(singular_values(c)?.iter().copied().fold(0.0, f64::max))
}

pub fn frobenius_norm(c: &Matrix) -> f64 {
    c.norm()
}

/// `‖C‖₂ ≤ 1 + tol`.
pub fn is_correlation(c: &Matrix, tol: f64) -> Result<bool> {
    ensure_square(c, "correlation")?;
    Ok(spectral_norm(c)? <= 1.0 + tol)
}

/// Parameterization of 𝒫(C) for a square C.
#[derive(Debug, Clone)]
pub struct TraceOptimizerSet {
    /// `V₁U₁ᵀ`
    pub base: Matrix,
    /// `V₀`, n×(n−r)
    pub kernel_right: Matrix,
    /// `U₀`, n×(n−r)
    pub kernel_left: Matrix,
    pub rank: usize,
}

impl TraceOptimizerSet {
    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// Free block size n − r.
    pub fn kernel_dim(&self) -> usize {
        self.kernel_right.ncols()
    }

    /// `base + V₀ K U₀ᵀ`. K must be (n−r)×(n−r) with `‖K‖₂ ≤ 1 + tol`.
    pub fn member(&self, k: &Matrix, tol: f64) -> Result<Matrix> {
        let f = self.kernel_dim();
        if k.shape() != (f, f) {
            return Err(Error::Dimension(format!(
                "kernel contraction must be {f}x{f}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        if f > 0 && spectral_norm(k)? > 1.0 + tol {
            return Err(Error::Precondition("kernel parameter is not a contraction".into()));
        }
        Ok(&self.base + &self.kernel_right * k * self.kernel_left.transpose())
    }

    /// The K = I member `V Uᵀ`, an orthogonal matrix.
    pub fn canonical_member(&self) -> Matrix {
        &self.base + &self.kernel_right * self.kernel_left.transpose()
    }
}

/// Rank of a descending spectrum: count of σᵢ > rank_tol·σ₁ (0 if σ₁ = 0).
pub fn numerical_rank(singular_values: &Vector, rank_tol: f64) -> usize {
    let s1 = singular_values.iter().copied().fold(0.0, f64::max);
    if s1 == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rank_tol * s1).count()
}

/// Returns `(‖C‖_*, 𝒫(C))`.
pub fn trace_max_set(c: &Matrix, rank_tol: f64) -> Result<(f64, TraceOptimizerSet)> {
    ensure_square(c, "trace maximization input")?;
    if !(rank_tol >= 0.0) {
        return Err(Error::Range(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    let dec = svd(c)?;
    let n = c.nrows();
    let r = numerical_rank(&dec.singular_values, rank_tol);
    let u1 = dec.u.columns(0, r);
    let v1 = dec.v.columns(0, r);
    let set = TraceOptimizerSet {
        base: v1 * u1.transpose(),
        kernel_right: dec.v.columns(r, n - r).into_owned(),
        kernel_left: dec.u.columns(r, n - r).into_owned(),
        rank: r,
    };
    Ok((dec.singular_values.sum(), set))
}

/// Canonical member `V Uᵀ` of 𝒫(C) for a square C.
pub fn canonical_trace_maximizer(c: &Matrix) -> Result<Matrix> {
    ensure_square(c, "trace maximization input")?;
    let dec = svd(c)?;
    Ok(&dec.v * dec.u.transpose())
}

/// Moore–Penrose pseudo-inverse, discarding σᵢ ≤ rank_tol·σ₁.
pub fn pseudo_inverse(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let dec = svd(a)?;
    let r = numerical_rank(&dec.singular_values, rank_tol);
    let mut v1 = dec.v.columns(0, r).into_owned();
    for j in 0..r {
        v1.column_mut(j).scale_mut(1.0 / dec.singular_values[j]);
    }
    Ok(v1 * dec.u.columns(0, r).transpose())
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Largest |A − Aᵀ| entry.
pub fn asymmetry(a: &Matrix) -> f64 {
    (a - a.transpose()).amax()
}

/// Symmetric eigendecomposition of the symmetric part of `a`.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    ensure_square(a, "symmetric eigen input")?;
    ensure_finite(a, "symmetric eigen input")?;
    let sym = symmetrize(a);
    match SymmetricEigen::try_new(sym.clone(), f64::EPSILON, SVD_MAX_ITER) {
        Some(eig) if eigen_is_accurate(&sym, &eig) => Ok(eig),
        // same failure mode as the SVD backend on near-singular input
        _ => jacobi_eigen(&sym),
    }
}

fn eigen_is_accurate(a: &Matrix, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> bool {
    let n = a.nrows();
    let tol = 1e3 * f64::EPSILON * n as f64;
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let q = &eig.eigenvectors;
    let mut ql = q.clone();
    for j in 0..n {
        ql.column_mut(j).scale_mut(eig.eigenvalues[j]);
    }
    (ql * q.transpose() - a).amax() <= tol * scale && orthonormal_error(q) <= tol
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
fn jacobi_eigen(a: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n, n);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
        }
        if off == 0.0 || off.sqrt() <= f64::EPSILON * m.norm() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 { 1.0 } else { -1.0 } / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // m ← Jᵀ m J with J the rotation in the (p, q) plane
                rotate_columns(&mut m, p, q, c, s);
                for k in 0..n {
                    let (x, y) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * x - s * y;
                    m[(q, k)] = s * x + c * y;
                }
                rotate_columns(&mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence);
    }
    Ok(SymmetricEigen { eigenvectors: v, eigenvalues: m.diagonal() })
}

/// Eigenvalues at or below the eigensolver's backward error, `64·n·ε·max|λ|`,
/// are indistinguishable from zero; their square roots would be √ε noise.
pub(crate) fn sqrt_eigenvalues(values: &Vector) -> Vec<f64> {
    let top = values.amax();
    let cut = 64.0 * values.len() as f64 * f64::EPSILON * top;
    values.iter().map(|&x| if x <= cut { 0.0 } else { x.sqrt() }).collect()
}

/// Principal square root of a symmetric PSD matrix; eigenvalues that are
/// negative or at rounding level are set to zero.
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let eig = symmetric_eigen(a)?;
    let mut q = eig.eigenvectors.clone();
    for (j, s) in sqrt_eigenvalues(&eig.eigenvalues).into_iter().enumerate() {
        q.column_mut(j).scale_mut(s);
    }
    Ok(symmetrize(&(q * eig.eigenvectors.transpose())))
}

/// `tr(A^{1/2})` for symmetric PSD A, with the same eigenvalue cut as [`psd_sqrt`].
pub fn psd_sqrt_trace(a: &Matrix) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = symmetric_eigen(a)?;
    Ok(sqrt_eigenvalues(&eig.eigenvalues).iter().sum())
}

/// QR factorization with non-negative diagonal in R.
pub fn qr_nonneg(a: &Matrix) -> Result<(Matrix, Matrix)> {
    ensure_square(a, "qr input")?;
    ensure_finite(a, "qr input")?;
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    Ok((q, r))
}

/// `‖QᵀQ − I‖_F`
pub fn orthogonality_defect(q: &Matrix) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - Matrix::identity(n, n)).norm()
}
