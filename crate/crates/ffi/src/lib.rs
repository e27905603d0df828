//! C ABI for `adapted-ot`.
//!
//! Factors live behind the opaque [`AotFactor`] handle. Every fallible call
//! returns an [`AotStatus`]; on failure [`aot_last_error`] describes the
//! problem. Matrices cross the boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adapted_ot::cholesky::{canonical_block_lower, minimal_cholesky, PSD_TOL};
use adapted_ot::couplings::{adapted_brenier_divergence, optimal_aw_correlation};
use adapted_ot::linalg::{Matrix, Vector};
use adapted_ot::metrics::{aw2_filtered_sq, bures_wasserstein_sq, dist_aw, geodesic_point};
use adapted_ot::process::{martingale_projection, BlockLowerCholesky, FilteredGaussianProcess};
use adapted_ot::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AotStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Range = 3,
    NonFinite = 4,
    NotSymmetric = 5,
    NotPsd = 6,
    Precondition = 7,
    NoConvergence = 8,
    Consistency = 9,
    Panic = 10,
    Other = 11,
}

/// Opaque block lower-triangular factor in 𝓛(N, d).
pub struct AotFactor {
    inner: BlockLowerCholesky,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AotStatus {
    match e {
        Error::Dimension(_) => AotStatus::Dimension,
        Error::Range(_) => AotStatus::Range,
        Error::NonFinite(_) => AotStatus::NonFinite,
        Error::NotSymmetric(_) => AotStatus::NotSymmetric,
        Error::NotPsd(_) => AotStatus::NotPsd,
        Error::Precondition(_) => AotStatus::Precondition,
        Error::NoConvergence => AotStatus::NoConvergence,
        Error::Consistency(_) => AotStatus::Consistency,
        _ => AotStatus::Other,
    }
}

struct Failure(AotStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null() -> Failure {
    Failure(AotStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AotStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            AotStatus::Panic
        }
    }
}

unsafe fn read_square(data: *const f64, n: usize) -> Result<Matrix, Failure> {
    if data.is_null() {
        return Err(null());
    }
    // SAFETY: caller promises `n * n` readable doubles.
    let slice = std::slice::from_raw_parts(data, n * n);
    Ok(Matrix::from_row_slice(n, n, slice))
}

unsafe fn read_vector(data: *const f64, n: usize) -> Vector {
    if data.is_null() {
        Vector::zeros(n)
    } else {
        // SAFETY: caller promises `n` readable doubles.
        Vector::from_column_slice(std::slice::from_raw_parts(data, n))
    }
}

unsafe fn factor_ref<'a>(f: *const AotFactor) -> Result<&'a BlockLowerCholesky, Failure> {
    // SAFETY: non-null handles come from this library and are live.
    f.as_ref().map(|h| &h.inner).ok_or_else(null)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    // SAFETY: checked non-null; caller provides writable storage.
    out.write(value);
    Ok(())
}

unsafe fn write_matrix(out: *mut f64, m: &Matrix) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    let row_major = m.transpose();
    // SAFETY: caller provides rows*cols writable doubles.
    ptr::copy_nonoverlapping(row_major.as_ptr(), out, m.len());
    Ok(())
}

fn boxed(l: BlockLowerCholesky) -> *mut AotFactor {
    Box::into_raw(Box::new(AotFactor { inner: l }))
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn aot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a factor from a row-major `(n_steps*dim)²` array. Entries above
/// the block diagonal must be zero.
///
/// # Safety
/// `data` must point to `(n_steps*dim)²` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_factor_new(
    data: *const f64,
    n_steps: usize,
    dim: usize,
    out: *mut *mut AotFactor,
) -> AotStatus {
    guard(|| {
        let size = n_steps.checked_mul(dim).ok_or_else(|| Failure(AotStatus::Range, "size overflow".into()))?;
        let m = read_square(data, size)?;
        let l = BlockLowerCholesky::new(m, n_steps, dim)?;
        write_out(out, boxed(l))
    })
}

/// Releases a factor. Null is ignored.
///
/// # Safety
/// `f` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aot_factor_free(f: *mut AotFactor) {
    if !f.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library.
        drop(Box::from_raw(f));
    }
}

/// Number of time steps N, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aot_factor_n_steps(f: *const AotFactor) -> usize {
    f.as_ref().map_or(0, |h| h.inner.n_steps())
}

/// Spatial dimension d, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aot_factor_dim(f: *const AotFactor) -> usize {
    f.as_ref().map_or(0, |h| h.inner.dim())
}

/// Copies the factor into `out` (row-major, `len` ≥ (N*d)² doubles).
///
/// # Safety
/// `f` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aot_factor_copy(f: *const AotFactor, out: *mut f64, len: usize) -> AotStatus {
    guard(|| {
        let l = factor_ref(f)?;
        if len < l.size() * l.size() {
            return Err(Failure(AotStatus::Dimension, "output buffer too small".into()));
        }
        write_matrix(out, l.as_matrix())
    })
}

/// Minimal Cholesky factor of an n×n PSD matrix, written row-major to `out`.
///
/// # Safety
/// `a` and `out` must each hold n² doubles.
#[no_mangle]
pub unsafe extern "C" fn aot_minimal_cholesky(a: *const f64, n: usize, out: *mut f64) -> AotStatus {
    guard(|| {
        let m = read_square(a, n)?;
        write_matrix(out, &minimal_cholesky(&m, PSD_TOL)?.factor)
    })
}

/// Bures–Wasserstein distance between two n×n covariances.
///
/// # Safety
/// `a` and `b` must each hold n² doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_bures_wasserstein(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> AotStatus {
    guard(|| {
        let (a, b) = (read_square(a, n)?, read_square(b, n)?);
        write_out(out, bures_wasserstein_sq(&a, &b)?.sqrt())
    })
}

/// `dist_AW(L, M)`.
///
/// # Safety
/// `l`, `m` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_dist_aw(l: *const AotFactor, m: *const AotFactor, out: *mut f64) -> AotStatus {
    guard(|| write_out(out, dist_aw(factor_ref(l)?, factor_ref(m)?)?))
}

/// Adapted Wasserstein distance between `(mean_x, L)` and `(mean_y, M)`.
/// A null mean is read as zero.
///
/// # Safety
/// Non-null means must hold N*d doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn aot_aw2_filtered(
    mean_x: *const f64,
    l: *const AotFactor,
    mean_y: *const f64,
    m: *const AotFactor,
    out: *mut f64,
) -> AotStatus {
    guard(|| {
        let (l, m) = (factor_ref(l)?, factor_ref(m)?);
        let x = FilteredGaussianProcess::new(read_vector(mean_x, l.size()), l.clone())?;
        let y = FilteredGaussianProcess::new(read_vector(mean_y, m.size()), m.clone())?;
        write_out(out, aw2_filtered_sq(&x, &y)?.sqrt())
    })
}

/// Adapted Brenier divergence `D_AB(L, M)` (squared scale).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_adapted_brenier_divergence(
    l: *const AotFactor,
    m: *const AotFactor,
    out: *mut f64,
) -> AotStatus {
    guard(|| write_out(out, adapted_brenier_divergence(factor_ref(l)?, factor_ref(m)?)?))
}

/// AW-optimal correlation blocks `P_1 … P_N`, each d×d row-major, written
/// consecutively to `out` (`len` ≥ N*d*d).
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aot_optimal_aw_correlation(
    l: *const AotFactor,
    m: *const AotFactor,
    out: *mut f64,
    len: usize,
) -> AotStatus {
    guard(|| {
        let (l, m) = (factor_ref(l)?, factor_ref(m)?);
        let p = optimal_aw_correlation(l, m)?;
        let d = l.dim();
        if len < l.n_steps() * d * d {
            return Err(Failure(AotStatus::Dimension, "output buffer too small".into()));
        }
        if out.is_null() {
            return Err(null());
        }
        for (t, b) in p.blocks().iter().enumerate() {
            write_matrix(out.add(t * d * d), b)?;
        }
        Ok(())
    })
}

/// Nearest martingale factor; the new handle must be freed by the caller.
///
/// # Safety
/// `l` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_martingale_projection(l: *const AotFactor, out: *mut *mut AotFactor) -> AotStatus {
    guard(|| write_out(out, boxed(martingale_projection(factor_ref(l)?))))
}

/// Lower-triangular representative `L Q` with non-negative diagonal.
///
/// # Safety
/// `l` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_canonical_block_lower(l: *const AotFactor, out: *mut *mut AotFactor) -> AotStatus {
    guard(|| write_out(out, boxed(canonical_block_lower(factor_ref(l)?).0)))
}

/// Factor of the geodesic point at `u ∈ [0, 1]` between zero-mean processes.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aot_geodesic_factor(
    l0: *const AotFactor,
    l1: *const AotFactor,
    u: f64,
    out: *mut *mut AotFactor,
) -> AotStatus {
    guard(|| {
        let x0 = FilteredGaussianProcess::centered(factor_ref(l0)?.clone());
        let x1 = FilteredGaussianProcess::centered(factor_ref(l1)?.clone());
        write_out(out, boxed(geodesic_point(&x0, &x1, u)?.factor))
    })
}
