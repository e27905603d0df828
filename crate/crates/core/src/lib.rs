//! Adapted (bicausal) optimal transport between discrete-time filtered
//! Gaussian processes.
//!
//! A process `X = a + L ε` is given by its mean `a ∈ ℝ^{Nd}` and a block
//! lower-triangular factor `L` ([`process::BlockLowerCholesky`]). Between two
//! such processes the adapted Wasserstein distance has the closed form
//!
//! ```text
//! AW₂²(X, Y) = ‖a − b‖² + ‖L‖_F² + ‖M‖_F² − 2 Σ_t ‖(LᵀM)_{t,t}‖_*
//! ```
//!
//! attained by a Gaussian coupling whose noise correlations are computed in
//! [`couplings`].
//!
//! ```
//! use adapted_ot::linalg::Matrix;
//! use adapted_ot::process::BlockLowerCholesky;
//! use adapted_ot::metrics::dist_aw;
//!
//! let l = BlockLowerCholesky::scalar(Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0])).unwrap();
//! let m = BlockLowerCholesky::scalar(Matrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0])).unwrap();
//! assert_eq!(dist_aw(&l, &m).unwrap(), 0.0);
//! ```

pub mod checks;
pub mod cholesky;
pub mod cli;
pub mod couplings;
pub mod ensemble;
pub mod error;
pub mod gelbrich;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod process;
pub mod random;

pub use error::{Error, Result};
