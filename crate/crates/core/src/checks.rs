//! Randomized invariant suite behind `aot check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cholesky::{minimal_cholesky, PSD_TOL};
use crate::couplings::{adapted_brenier, factor_coupling_cost, optimal_aw_correlation};
use crate::error::Result;
use crate::linalg::{default_rank_tol, frobenius_norm, nuclear_norm, spectral_norm, trace_max_set};
use crate::metrics::{
    aw2_martingale_formula, bures_wasserstein_sq_cholesky, bures_wasserstein_sq_sqrtm, dist_aw, dist_aw_sq,
    procrustes_optimizer,
};
use crate::random;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed violation (0 when every trial held).
    pub worst: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<f64>;

/// Each check returns its violation; positive means the property failed.
const CHECKS: [(&str, Check); 12] = [
    ("norm chain", |rng| {
        let n = rng.gen_range(1..6);
        let c = random::gaussian_matrix(rng, n, n);
        let (s, f, nu) = (spectral_norm(&c)?, frobenius_norm(&c), nuclear_norm(&c)?);
        Ok((s - f).max(f - nu).max(nu - (n as f64).sqrt() * f) - 1e-12 * (1.0 + nu))
    }),
    ("trace max bound", |rng| {
        let n = rng.gen_range(1..6);
        let c = random::gaussian_matrix(rng, n, n);
        let p = random::contraction(rng, n);
        Ok((&c * &p).trace() - nuclear_norm(&c)? - 1e-9)
    }),
    ("trace max members", |rng| {
        let n = rng.gen_range(2..6);
        let rank = rng.gen_range(0..=n);
        let c = random::gaussian_matrix(rng, n, rank) * random::gaussian_matrix(rng, rank, n);
        let (value, set) = trace_max_set(&c, default_rank_tol(n))?;
        let k = random::contraction(rng, set.kernel_dim());
        let p = set.member(&k, 1e-12)?;
        Ok(((&c * &p).trace() - value).abs().max(spectral_norm(&p)? - 1.0) - 1e-9)
    }),
    ("minimal cholesky reconstruction", |rng| {
        let n = rng.gen_range(1..8);
        let rank = rng.gen_range(0..=n);
        let a = random::psd(rng, n, rank);
        let l = minimal_cholesky(&a, PSD_TOL)?.factor;
        Ok((&l * l.transpose() - &a).norm() - 1e-8 * (1.0 + a.norm()))
    }),
    ("bw routes agree", |rng| {
        let n = rng.gen_range(1..7);
        let (ra, rb) = (rng.gen_range(0..=n), rng.gen_range(0..=n));
        let (a, b) = (random::psd(rng, n, ra), random::psd(rng, n, rb));
        let diff = (bures_wasserstein_sq_sqrtm(&a, &b)? - bures_wasserstein_sq_cholesky(&a, &b)?).abs();
        Ok(diff - 1e-8 * (1.0 + a.trace() + b.trace()))
    }),
    ("dist_aw symmetry and triangle", |rng| {
        let (n, d) = (rng.gen_range(1..5), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        let k = random::factor(rng, n, d, 0.3);
        let asym = (dist_aw(&l, &m)? - dist_aw(&m, &l)?).abs();
        let tri = dist_aw(&l, &k)? - dist_aw(&l, &m)? - dist_aw(&m, &k)?;
        Ok((asym - 1e-12 * (1.0 + dist_aw(&l, &m)?)).max(tri - 1e-9))
    }),
    ("right invariance", |rng| {
        let (n, d) = (rng.gen_range(1..5), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        let q = random::block_orthogonal(rng, n, d);
        Ok((dist_aw(&l, &m.mul_block_diag(&q)?)? - dist_aw(&l, &m)?).abs() - 1e-9)
    }),
    ("frobenius and column bounds", |rng| {
        let (n, d) = (rng.gen_range(1..5), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        let dist2 = dist_aw_sq(&l, &m)?;
        let upper = dist2.sqrt() - (l.as_matrix() - m.as_matrix()).norm();
        let lower: f64 = (0..n).map(|t| (l.column_block(t).norm() - m.column_block(t).norm()).powi(2)).sum();
        Ok(upper.max(lower - dist2) - 1e-9)
    }),
    ("procrustes and optimal coupling", |rng| {
        let (n, d) = (rng.gen_range(1..6), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        let dist2 = dist_aw_sq(&l, &m)?;
        let cost = factor_coupling_cost(&l, &m, &optimal_aw_correlation(&l, &m)?)?;
        let proc = procrustes_optimizer(&l, &m)?.achieved_value.powi(2);
        Ok((dist2 - cost).abs().max((dist2 - proc).abs()) - 1e-8 * (1.0 + dist2))
    }),
    ("bw below bicausal costs", |rng| {
        let (n, d) = (rng.gen_range(1..5), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        let bw2 = bures_wasserstein_sq_sqrtm(&l.covariance(), &m.covariance())?;
        let p = crate::couplings::BlockCorrelation::new((0..n).map(|_| random::contraction(rng, d)).collect())?;
        Ok(bw2 - dist_aw_sq(&l, &m)?.min(factor_coupling_cost(&l, &m, &p)?) - 1e-9)
    }),
    ("martingale formula", |rng| {
        let (n, d) = (rng.gen_range(1..6), rng.gen_range(1..4));
        let l = random::martingale_factor(rng, n, d, 0.3);
        let m = random::martingale_factor(rng, n, d, 0.3);
        let dist2 = dist_aw_sq(&l, &m)?;
        Ok((aw2_martingale_formula(&l, &m)? - dist2).abs() - 1e-8 * (1.0 + dist2))
    }),
    ("adapted brenier above aw", |rng| {
        let (n, d) = (rng.gen_range(1..6), rng.gen_range(1..4));
        let l = random::factor(rng, n, d, 0.3);
        let m = random::factor(rng, n, d, 0.3);
        Ok(dist_aw_sq(&l, &m)? - adapted_brenier(&l, &m)?.divergence - 1e-9)
    }),
];

pub fn run_checks(trials: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::with_capacity(CHECKS.len());
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut failures = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let v = check(&mut rng)?;
            if v > 0.0 {
                failures += 1;
                worst = worst.max(v);
            }
        }
        out.push(CheckOutcome { name, trials, failures, worst });
    }
    Ok(out)
}
