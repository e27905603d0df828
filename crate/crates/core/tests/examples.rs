mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use adapted_ot::cholesky::{canonical_block_lower, chronological_inverse, minimal_cholesky, PSD_TOL};
use adapted_ot::couplings::{
    ab_attains_aw, adapted_brenier, adapted_brenier_divergence, classical_brenier_correlation, coupling_cost,
    factor_coupling_cost, full_coupling_cost, optimal_aw_correlation, BlockCorrelation,
};
use adapted_ot::gelbrich::build_counterexample;
use adapted_ot::linalg::{
    canonical_trace_maximizer, frobenius_norm, is_correlation, nuclear_norm, spectral_norm, trace_max_set, Matrix,
    Vector,
};
use adapted_ot::metrics::{
    aw2_filtered, aw2_gaussian_laws_sq, aw2_martingale_formula, aw_equivalence, bures_wasserstein,
    bures_wasserstein_sq, bures_wasserstein_sq_sqrtm, dist_aw, dist_aw_sq, geodesic_point, procrustes_optimizer,
    w2_gaussian, w2_gaussian_sq,
};
use adapted_ot::process::{
    common_dynamics_projection, is_markov, is_martingale, martingale_projection, sample_paths, BlockLowerCholesky,
    FilteredGaussianProcess, STRUCTURE_TOL,
};
use adapted_ot::Error;
use common::*;

const TOL: f64 = 1e-9;

// norms and trace maximization

#[test]
fn norms_of_small_matrices() {
    let i3 = Matrix::identity(3, 3);
    assert_close(spectral_norm(&i3).unwrap(), 1.0, TOL);
    assert_close(frobenius_norm(&i3), 3f64.sqrt(), TOL);
    assert_close(nuclear_norm(&i3).unwrap(), 3.0, TOL);
    let d = sq(2, &[2.0, 0.0, 0.0, 0.0]);
    assert_close(spectral_norm(&d).unwrap(), 2.0, TOL);
    assert_close(frobenius_norm(&d), 2.0, TOL);
    let ones = sq(2, &[1.0, 1.0, 1.0, 1.0]);
    assert_close(spectral_norm(&ones).unwrap(), 2.0, TOL);
    assert_close(frobenius_norm(&ones), 2.0, TOL);
    assert_close(nuclear_norm(&ones).unwrap(), 2.0, TOL);
}

#[test]
fn correlation_predicate() {
    assert!(is_correlation(&Matrix::identity(3, 3), 1e-12).unwrap());
    assert!(!is_correlation(&(Matrix::identity(3, 3) * 2.0), 1e-12).unwrap());
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    assert!(is_correlation(&sq(2, &[c, -s, s, c]), 1e-12).unwrap());
    assert!(matches!(is_correlation(&mat(2, 3, &[0.0; 6]), 1e-12), Err(Error::Dimension(_))));
}

#[test]
fn trace_max_of_rank_one_diagonal() {
    let c = sq(2, &[2.0, 0.0, 0.0, 0.0]);
    let (value, set) = trace_max_set(&c, 1e-12).unwrap();
    assert_close(value, 2.0, TOL);
    assert_eq!(set.kernel_dim(), 1);
    for k in [-1.0, -0.5, 0.0, 0.7, 1.0] {
        let p = set.member(&sq(1, &[k]), 1e-12).unwrap();
        assert_mat_close(&p, &sq(2, &[1.0, 0.0, 0.0, k]), TOL);
        assert_close((&c * &p).trace(), 2.0, TOL);
    }
    assert!(set.member(&sq(1, &[1.5]), 1e-12).is_err());
}

#[test]
fn trace_max_of_zero_and_invertible() {
    let (value, set) = trace_max_set(&Matrix::zeros(2, 2), 1e-12).unwrap();
    assert_eq!(value, 0.0);
    assert_eq!(set.kernel_dim(), 2);

    let c = sq(2, &[3.0, 1.0, -1.0, 2.0]);
    let (value, set) = trace_max_set(&c, 1e-12).unwrap();
    assert_eq!(set.kernel_dim(), 0);
    let p = set.canonical_member();
    assert_mat_close(&p, &canonical_trace_maximizer(&c).unwrap(), TOL);
    assert_close((&c * &p).trace(), value, TOL);
    assert_close(value, nuclear_norm(&c).unwrap(), TOL);
}

// minimal Cholesky and friends

#[test]
fn minimal_cholesky_examples() {
    let a = sq(2, &[0.0, 0.0, 0.0, 1.0]);
    let mc = minimal_cholesky(&a, PSD_TOL).unwrap();
    assert_eq!(mc.factor, a);
    assert_eq!(mc.active, vec![1]);

    let mc = minimal_cholesky(&sq(2, &[1.0, 1.0, 1.0, 1.0]), PSD_TOL).unwrap();
    assert_mat_close(&mc.factor, &sq(2, &[1.0, 0.0, 1.0, 0.0]), TOL);
    assert_eq!(mc.factor[(1, 1)], 0.0);
    assert_eq!(mc.active, vec![0]);

    let inst = build_counterexample(1.0).unwrap();
    let mc = minimal_cholesky(&inst.covariance_y(), PSD_TOL).unwrap();
    assert_mat_close(&mc.factor, &sq(2, &[1.0, 0.0, 3.0, 1.0]), TOL);

    let i = Matrix::identity(4, 4);
    assert_mat_close(&minimal_cholesky(&i, PSD_TOL).unwrap().factor, &i, TOL);
}

#[test]
fn minimal_cholesky_rejects_bad_input() {
    assert!(matches!(minimal_cholesky(&sq(2, &[1.0, 0.0, 0.0, -1.0]), PSD_TOL), Err(Error::NotPsd(_))));
    assert!(matches!(minimal_cholesky(&sq(2, &[1.0, 0.5, 0.0, 1.0]), PSD_TOL), Err(Error::NotSymmetric(_))));
    assert!(matches!(minimal_cholesky(&sq(2, &[0.0, 1.0, 1.0, 1.0]), PSD_TOL), Err(Error::NotPsd(_))));
    assert!(matches!(minimal_cholesky(&mat(2, 3, &[0.0; 6]), PSD_TOL), Err(Error::Dimension(_))));
}

#[test]
fn chronological_inverse_examples() {
    let ci = chronological_inverse(&minimal_cholesky(&sq(2, &[0.0, 0.0, 0.0, 1.0]), PSD_TOL).unwrap());
    assert_mat_close(&ci.matrix, &sq(2, &[0.0, 0.0, 0.0, 1.0]), TOL);

    let ci = chronological_inverse(&minimal_cholesky(&sq(2, &[1.0, 1.0, 1.0, 1.0]), PSD_TOL).unwrap());
    assert_mat_close(&ci.matrix, &sq(2, &[1.0, 0.0, 0.0, 0.0]), TOL);

    let l = sq(3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5]);
    let mc = minimal_cholesky(&(&l * l.transpose()), PSD_TOL).unwrap();
    let ci = chronological_inverse(&mc);
    assert_mat_close(&(&mc.factor * &ci.matrix), &Matrix::identity(3, 3), 1e-10);
}

#[test]
fn canonical_block_lower_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 0.5, 2.0]);
    assert_mat_close(canonical_block_lower(&l).0.as_matrix(), l.as_matrix(), TOL);

    // d = 2, diagonal block [[0, 1], [0, 0]]
    let l = factor(1, 2, &[0.0, 1.0, 0.0, 0.0]);
    let (lt, q) = canonical_block_lower(&l);
    assert_mat_close(lt.as_matrix(), &sq(2, &[1.0, 0.0, 0.0, 0.0]), TOL);
    assert_mat_close(&(&q[0] * q[0].transpose()), &Matrix::identity(2, 2), TOL);
    assert!(dist_aw(&l, &lt).unwrap() <= TOL);

    let l = scalar_factor(2, &[0.0, 0.0, 1.0, -1.0]);
    let (lt, q) = canonical_block_lower(&l);
    assert_mat_close(lt.as_matrix(), &sq(2, &[0.0, 0.0, 1.0, 1.0]), TOL);
    assert_close(q[1][(0, 0)], -1.0, TOL);
    assert_close(lt.frobenius_sq(), l.frobenius_sq(), TOL);
    assert!(dist_aw(&l, &lt).unwrap() <= TOL);
}

// process structure

fn random_walk(n: usize) -> BlockLowerCholesky {
    BlockLowerCholesky::from_blocks(n, 1, |_, _| sq(1, &[1.0])).unwrap()
}

#[test]
fn martingale_examples() {
    let walk = FilteredGaussianProcess::centered(random_walk(3));
    assert!(is_martingale(&walk, STRUCTURE_TOL));
    let l = FilteredGaussianProcess::centered(scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]));
    assert!(!is_martingale(&l, STRUCTURE_TOL));
    let shifted = FilteredGaussianProcess::new(Vector::from_vec(vec![0.0, 1.0, 0.0]), random_walk(3)).unwrap();
    assert!(!is_martingale(&shifted, STRUCTURE_TOL));
}

#[test]
fn white_noise_is_markov_but_not_a_martingale() {
    let noise = FilteredGaussianProcess::centered(BlockLowerCholesky::identity(3, 2));
    assert!(!is_martingale(&noise, STRUCTURE_TOL));
    let (markov, tr) = is_markov(&noise, STRUCTURE_TOL);
    assert!(markov);
    for phi in &tr.transitions {
        assert_mat_close(phi, &Matrix::zeros(2, 2), TOL);
    }
}

#[test]
fn markov_examples() {
    let (markov, tr) = is_markov(&FilteredGaussianProcess::centered(random_walk(4)), STRUCTURE_TOL);
    assert!(markov);
    for phi in &tr.transitions {
        assert_close(phi[(0, 0)], 1.0, 1e-10);
    }
    let u = 0.5;
    let lu = scalar_factor(3, &[1.0, 0.0, 0.0, u, 1.0, 0.0, u, u, 1.0]);
    assert!(!is_markov(&FilteredGaussianProcess::centered(lu), STRUCTURE_TOL).0);

    let mgle = FilteredGaussianProcess::centered(scalar_factor(3, &[2.0, 0.0, 0.0, 2.0, -1.0, 0.0, 2.0, -1.0, 0.5]));
    assert!(is_martingale(&mgle, STRUCTURE_TOL));
    assert!(is_markov(&mgle, STRUCTURE_TOL).0);
}

#[test]
fn markov_set_is_not_closed() {
    let d = 2;
    let seq = |eps: f64| {
        BlockLowerCholesky::from_blocks(2, d, |s, t| match (s, t) {
            (0, 0) => Matrix::identity(d, d) * eps,
            _ => Matrix::identity(d, d),
        })
        .unwrap()
    };
    for n in [1.0, 10.0, 1e3, 1e6] {
        let l = seq(1.0 / n);
        let (markov, tr) = is_markov(&FilteredGaussianProcess::centered(l), STRUCTURE_TOL);
        assert!(markov, "n = {n}");
        assert_close(tr.transitions[0][(0, 0)], n, 1e-6 * n);
    }
    assert!(!is_markov(&FilteredGaussianProcess::centered(seq(0.0)), STRUCTURE_TOL).0);
}

#[test]
fn martingale_projection_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]);
    let p = martingale_projection(&l);
    assert_mat_close(p.as_matrix(), &sq(2, &[2.0, 0.0, 2.0, 2.0]), TOL);
    assert!(is_martingale(&FilteredGaussianProcess::centered(p.clone()), 0.0));

    let walk = random_walk(4);
    assert_eq!(martingale_projection(&walk), walk);
    let zero = BlockLowerCholesky::zeros(3, 2);
    assert_eq!(martingale_projection(&zero), zero);
}

#[test]
fn common_dynamics_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 0.0, 1.0]);
    let p = common_dynamics_projection(&l, &[sq(1, &[2.0])]).unwrap();
    assert_mat_close(p.as_matrix(), &sq(2, &[0.2, 0.0, 0.4, 1.0]), 1e-12);

    let l = factor(
        3,
        2,
        &[
            1.0, 0.5, 0.0, 0.0, 0.0, 0.0, //
            -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, //
            0.3, 0.1, 1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.2, 1.0, 0.0, 0.0, //
            2.0, 0.0, 0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 3.0, 0.0, 1.0, //
        ],
    );
    let ident = vec![Matrix::identity(2, 2); 2];
    let p = common_dynamics_projection(&l, &ident).unwrap();
    assert_mat_close(p.as_matrix(), martingale_projection(&l).as_matrix(), 1e-12);

    let phi = vec![sq(2, &[0.5, 1.0, 0.0, -1.0]), sq(2, &[2.0, 0.0, 1.0, 1.0])];
    let p = common_dynamics_projection(&l, &phi).unwrap();
    assert_mat_close(common_dynamics_projection(&p, &phi).unwrap().as_matrix(), p.as_matrix(), 1e-10);

    assert!(matches!(common_dynamics_projection(&l, &phi[..1]), Err(Error::Dimension(_))));
}

#[test]
fn sampling_examples() {
    let mean = Vector::from_vec(vec![1.0, -2.0, 0.5]);
    let x = FilteredGaussianProcess::new(mean.clone(), BlockLowerCholesky::zeros(3, 1)).unwrap();
    let paths = sample_paths(&x, 5, 1).unwrap();
    for row in paths.row_iter() {
        assert_eq!(row.transpose(), mean);
    }
    let y = FilteredGaussianProcess::centered(angle_factor(FRAC_PI_3));
    assert_eq!(sample_paths(&y, 100, 7).unwrap(), sample_paths(&y, 100, 7).unwrap());
    assert_ne!(sample_paths(&y, 100, 7).unwrap(), sample_paths(&y, 100, 8).unwrap());
    assert!(sample_paths(&y, 0, 7).is_err());
}

// distances

#[test]
fn bures_wasserstein_examples() {
    let a = sq(2, &[2.0, 1.0, 1.0, 3.0]);
    assert_close(bures_wasserstein(&a, &a).unwrap(), 0.0, 1e-7);
    let diag = sq(2, &[0.0, 0.0, 0.0, 1.0]);
    assert_close(bures_wasserstein_sq(&diag, &Matrix::identity(2, 2)).unwrap(), 1.0, TOL);
    assert_close(bures_wasserstein_sq_sqrtm(&diag, &Matrix::identity(2, 2)).unwrap(), 1.0, TOL);
    assert_close(bures_wasserstein(&sq(1, &[4.0]), &sq(1, &[9.0])).unwrap(), 1.0, TOL);
    assert!(matches!(bures_wasserstein(&sq(1, &[-1.0]), &sq(1, &[1.0])), Err(Error::NotPsd(_))));
}

#[test]
fn w2_examples() {
    let a = sq(2, &[2.0, 1.0, 1.0, 3.0]);
    let b = sq(2, &[1.0, 0.0, 0.0, 4.0]);
    let z = zeros(2);
    assert_close(w2_gaussian(&z, &a, &z, &a).unwrap(), 0.0, 1e-7);
    let e1 = Vector::from_vec(vec![1.0, 0.0]);
    assert_close(w2_gaussian_sq(&e1, &a, &z, &a).unwrap(), 1.0, 1e-8);
    assert_close(w2_gaussian_sq(&z, &a, &z, &b).unwrap(), bures_wasserstein_sq(&a, &b).unwrap(), TOL);
}

#[test]
fn angle_family_distances() {
    let grid: Vec<f64> = (0..7).map(|k| k as f64 * PI / 6.0).collect();
    for &th in &grid {
        for &ph in &grid {
            let want = 2.0 * (1.0 - (th.cos() * ph.cos()).abs() - (th.sin() * ph.sin()).abs());
            assert_close(dist_aw_sq(&angle_factor(th), &angle_factor(ph)).unwrap(), want.max(0.0), TOL);
        }
        let want = 3.0 - 2.0 * th.sin().abs();
        assert_close(dist_aw_sq(&angle_factor(th), &BlockLowerCholesky::identity(2, 1)).unwrap(), want, TOL);
    }
    let cmin = scalar_factor(2, &[0.0, 0.0, 0.0, 1.0]);
    assert_close(dist_aw_sq(&cmin, &BlockLowerCholesky::identity(2, 1)).unwrap(), 1.0, TOL);
}

#[test]
fn zero_distance_pair_and_equivalence() {
    let l = scalar_factor(2, &[0.0, 0.0, 1.0, 1.0]);
    let m = scalar_factor(2, &[0.0, 0.0, -1.0, 1.0]);
    assert_close(dist_aw(&l, &m).unwrap(), 0.0, TOL);
    let q = aw_equivalence(&l, &m, 1e-9).unwrap().expect("equivalent");
    assert_close(q[0][(0, 0)], -1.0, TOL);
    assert_close(q[1][(0, 0)], 1.0, TOL);
    assert_mat_close(l.mul_block_diag(&q).unwrap().as_matrix(), m.as_matrix(), TOL);

    assert!(aw_equivalence(&l, &BlockLowerCholesky::identity(2, 1), 1e-9).unwrap().is_none());
}

#[test]
fn minimal_factors_are_not_jointly_optimal() {
    let a = sq(2, &[1.0, 1.0, 1.0, 1.0]);
    let b = sq(2, &[0.0, 0.0, 0.0, 1.0]);
    assert_close(aw2_gaussian_laws_sq(&zeros(2), &a, &zeros(2), &b, 1).unwrap(), 3.0, TOL);
    let l = scalar_factor(2, &[1.0, 0.0, 1.0, 0.0]);
    let m = scalar_factor(2, &[0.0, 0.0, 1.0, 0.0]);
    assert_mat_close(&(m.as_matrix() * m.as_matrix().transpose()), &b, 0.0);
    assert_close(dist_aw_sq(&l, &m).unwrap(), 1.0, TOL);
}

#[test]
fn gaussian_laws_examples() {
    let inst = build_counterexample(1.0).unwrap();
    let z = zeros(2);
    assert_close(aw2_gaussian_laws_sq(&z, &inst.covariance_x(), &z, &inst.covariance_y(), 1).unwrap(), 9.0, TOL);
    let a = sq(2, &[2.0, 1.0, 1.0, 3.0]);
    assert_close(aw2_gaussian_laws_sq(&z, &a, &z, &a, 1).unwrap(), 0.0, TOL);
    assert!(matches!(aw2_gaussian_laws_sq(&z, &a, &z, &a, 3), Err(Error::Dimension(_))));
}

#[test]
fn filtered_distance_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]);
    let m = scalar_factor(2, &[0.5, 0.0, -1.0, 1.0]);
    let x = FilteredGaussianProcess::centered(l.clone());
    assert_close(aw2_filtered(&x, &x).unwrap(), 0.0, TOL);
    let v = Vector::from_vec(vec![3.0, -4.0]);
    let shifted = FilteredGaussianProcess::new(v, l.clone()).unwrap();
    assert_close(aw2_filtered(&shifted, &x).unwrap(), 5.0, TOL);
    let y = FilteredGaussianProcess::centered(m.clone());
    assert_close(aw2_filtered(&x, &y).unwrap(), dist_aw(&l, &m).unwrap(), TOL);
    let other = FilteredGaussianProcess::centered(BlockLowerCholesky::identity(3, 1));
    assert!(matches!(aw2_filtered(&x, &other), Err(Error::Dimension(_))));
}

#[test]
fn procrustes_examples() {
    let l = scalar_factor(3, &[2.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.5, -1.0, 3.0]);
    let sol = procrustes_optimizer(&l, &l).unwrap();
    for q in &sol.q {
        assert_mat_close(q, &Matrix::identity(1, 1), TOL);
    }
    assert_close(sol.achieved_value, 0.0, TOL);

    let noise = BlockLowerCholesky::identity(3, 1);
    let walk = random_walk(3);
    let sol = procrustes_optimizer(&noise, &walk).unwrap();
    for q in &sol.q {
        assert_mat_close(q, &Matrix::identity(1, 1), TOL);
    }
    assert_close(sol.achieved_value.powi(2), dist_aw_sq(&noise, &walk).unwrap(), TOL);
}

#[test]
fn geodesic_examples() {
    let x0 = FilteredGaussianProcess::new(Vector::from_vec(vec![1.0, 0.0]), scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]))
        .unwrap();
    let x1 = FilteredGaussianProcess::new(Vector::from_vec(vec![0.0, 2.0]), scalar_factor(2, &[-0.5, 0.0, 1.0, -1.0]))
        .unwrap();
    let start = geodesic_point(&x0, &x1, 0.0).unwrap();
    assert_eq!(start.factor, x0.factor);
    assert_eq!(start.mean, x0.mean);
    assert_close(aw2_filtered(&geodesic_point(&x0, &x1, 1.0).unwrap(), &x1).unwrap(), 0.0, 1e-8);
    let total = aw2_filtered(&x0, &x1).unwrap();
    let grid = [0.0, 0.2, 0.5, 0.7, 1.0];
    for &u in &grid {
        for &v in &grid {
            let (pu, pv) = (geodesic_point(&x0, &x1, u).unwrap(), geodesic_point(&x0, &x1, v).unwrap());
            assert_close(aw2_filtered(&pu, &pv).unwrap(), (u - v).abs() * total, 1e-8);
        }
    }
    assert!(matches!(geodesic_point(&x0, &x1, 1.5), Err(Error::Range(_))));
    assert!(matches!(geodesic_point(&x0, &x1, -0.1), Err(Error::Range(_))));
}

#[test]
fn martingale_formula_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 1.0, 1.0]);
    let m = scalar_factor(2, &[2.0, 0.0, 2.0, 3.0]);
    assert_close(aw2_martingale_formula(&l, &l).unwrap(), 0.0, TOL);
    assert_close(aw2_martingale_formula(&l, &m).unwrap(), 6.0, TOL);
    assert_close(dist_aw_sq(&l, &m).unwrap(), 6.0, TOL);

    let a = factor(1, 2, &[1.0, 0.0, 2.0, 1.0]);
    let b = factor(1, 2, &[3.0, 0.0, -1.0, 0.5]);
    let cov = |f: &BlockLowerCholesky| f.covariance();
    assert_close(aw2_martingale_formula(&a, &b).unwrap(), bures_wasserstein_sq(&cov(&a), &cov(&b)).unwrap(), 1e-8);
    let not_mgle = scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]);
    assert!(matches!(aw2_martingale_formula(&not_mgle, &l), Err(Error::Precondition(_))));
}

// couplings

#[test]
fn coupling_cost_examples() {
    let l = scalar_factor(2, &[1.0, 0.0, 3.0, 2.0]);
    let m = scalar_factor(2, &[0.5, 0.0, -1.0, 1.0]);
    let a = Vector::from_vec(vec![1.0, 1.0]);
    let x = FilteredGaussianProcess::new(a.clone(), l.clone()).unwrap();
    let y = FilteredGaussianProcess::centered(m.clone());
    let indep = coupling_cost(&x, &y, &BlockCorrelation::zeros(2, 1)).unwrap();
    assert_close(indep, 2.0 + l.frobenius_sq() + m.frobenius_sq(), TOL);
    let sync = coupling_cost(&x, &y, &BlockCorrelation::identity(2, 1)).unwrap();
    assert_close(sync, 2.0 + (l.as_matrix() - m.as_matrix()).norm_squared(), TOL);

    let (two, three) = (scalar_factor(1, &[2.0]), scalar_factor(1, &[3.0]));
    for rho in [-1.0, -0.3, 0.0, 0.6, 1.0] {
        let p = BlockCorrelation::new(vec![sq(1, &[rho])]).unwrap();
        assert_close(factor_coupling_cost(&two, &three, &p).unwrap(), 13.0 - 12.0 * rho, TOL);
    }
    assert!(matches!(BlockCorrelation::new(vec![sq(1, &[1.5])]), Err(Error::Precondition(_))));
}

#[test]
fn optimal_correlation_examples() {
    let i = BlockLowerCholesky::identity(3, 2);
    for p in optimal_aw_correlation(&i, &i).unwrap().blocks() {
        assert_mat_close(p, &Matrix::identity(2, 2), TOL);
    }
    let l = scalar_factor(2, &[1.0, 0.0, 1.0, 0.0]);
    let m = scalar_factor(2, &[0.0, 0.0, 1.0, 0.0]);
    let p = optimal_aw_correlation(&l, &m).unwrap();
    assert_close(p.blocks()[0][(0, 0)], 1.0, TOL);
    assert_close(factor_coupling_cost(&l, &m, &p).unwrap(), 1.0, TOL);
}

#[test]
fn classical_brenier_examples() {
    let l = sq(2, &[1.0, 0.0, 0.5, 2.0]);
    let f = BlockLowerCholesky::new(l.clone(), 1, 2).unwrap();
    let p = classical_brenier_correlation(&f, &f).unwrap();
    assert_mat_close(&p.matrix, &Matrix::identity(2, 2), TOL);
    assert_close(full_coupling_cost(&f, &f, &p).unwrap(), 0.0, TOL);
    assert!(!p.is_bicausal());

    let l = scalar_factor(2, &[1.0, 0.0, 0.0, -2.0]);
    let m = scalar_factor(2, &[3.0, 0.0, 0.0, 1.0]);
    let p = classical_brenier_correlation(&l, &m).unwrap();
    assert_mat_close(&p.matrix, &sq(2, &[1.0, 0.0, 0.0, -1.0]), TOL);
    let bw2 = bures_wasserstein_sq(&l.covariance(), &m.covariance()).unwrap();
    assert_close(full_coupling_cost(&l, &m, &p).unwrap(), bw2, 1e-8);
}

#[test]
fn adapted_brenier_scalar_gap() {
    let l = scalar_factor(2, &[1.0, 0.0, 1.0, 1.0]);
    let m = scalar_factor(2, &[1.0, 0.0, -2.0, 1.0]);
    let ab = adapted_brenier(&l, &m).unwrap();
    for p in ab.correlation.blocks() {
        assert_close(p[(0, 0)], 1.0, TOL);
    }
    assert_close(ab.divergence, 9.0, TOL);
    assert_close(dist_aw_sq(&l, &m).unwrap(), 5.0, TOL);
    assert!(!ab_attains_aw(&l, &m, 1e-9).unwrap());
}

#[test]
fn adapted_brenier_agrees_on_martingales_and_identical_factors() {
    let l = scalar_factor(3, &[2.0, 0.0, 0.0, 2.0, -1.0, 0.0, 2.0, -1.0, 0.5]);
    let m = scalar_factor(3, &[-1.0, 0.0, 0.0, -1.0, 3.0, 0.0, -1.0, 3.0, 1.0]);
    assert_close(adapted_brenier_divergence(&l, &m).unwrap(), dist_aw_sq(&l, &m).unwrap(), 1e-8);
    assert!(ab_attains_aw(&l, &m, 1e-8).unwrap());

    let g = factor(
        2,
        2,
        &[
            1.0, 0.5, 0.0, 0.0, //
            -0.3, 2.0, 0.0, 0.0, //
            1.0, 1.0, 1.0, 0.0, //
            0.0, 2.0, 0.4, 3.0, //
        ],
    );
    assert_close(adapted_brenier_divergence(&g, &g).unwrap(), 0.0, TOL);
    assert!(ab_attains_aw(&g, &g, 1e-9).unwrap());
}

#[test]
fn adapted_brenier_reflection_example() {
    // M = diag(S, I) with S a reflection: the adapted Brenier map undoes S
    let l = BlockLowerCholesky::identity(2, 2);
    let m = factor(
        2,
        2,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
        ],
    );
    assert_close(adapted_brenier_divergence(&l, &m).unwrap(), 0.0, TOL);
    assert_close((l.as_matrix() - m.as_matrix()).norm_squared(), 4.0, TOL);
}

#[test]
fn adapted_brenier_can_exceed_synchronous() {
    let alpha = 10.0;
    let l = factor(
        2,
        2,
        &[
            1.0, 0.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, 0.0, //
            alpha, 0.0, 1.0, 0.0, //
            0.0, alpha, 0.0, 1.0, //
        ],
    );
    let m = factor(
        2,
        2,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            alpha, 0.0, 1.0, 0.0, //
            0.0, alpha, 0.0, 1.0, //
        ],
    );
    let sync = factor_coupling_cost(&l, &m, &BlockCorrelation::identity(2, 2)).unwrap();
    assert_close(sync, 1.0, TOL);
    assert!(adapted_brenier_divergence(&l, &m).unwrap() > sync + 1.0);
    assert!(dist_aw_sq(&l, &m).unwrap() <= sync + TOL);
}

#[test]
fn scalar_adapted_brenier_with_agreeing_signs() {
    let l = scalar_factor(3, &[1.0, 0.0, 0.0, 0.5, 2.0, 0.0, -1.0, 0.3, 1.5]);
    let m = scalar_factor(3, &[2.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.2, -0.4, 3.0]);
    assert_close(adapted_brenier_divergence(&l, &m).unwrap(), dist_aw_sq(&l, &m).unwrap(), 1e-9);
}

// Gelbrich

#[test]
fn gelbrich_examples() {
    let inst = build_counterexample(1.0).unwrap();
    assert_close(inst.analytic_gaussian_aw2, 9.0, TOL);
    assert_close(inst.analytic_coupling_cost, 7.0, TOL);
    let tiny = build_counterexample(1e-12).unwrap();
    assert_close(tiny.analytic_gaussian_aw2, 4.0, 1e-9);
    assert_close(tiny.analytic_coupling_cost, 4.0, 1e-9);
    for delta in [0.5, 1.0, 2.0] {
        let inst = build_counterexample(delta).unwrap();
        assert_eq!(inst.analytic_coupling_cost + 2.0 * delta, inst.analytic_gaussian_aw2);
    }
    assert!(matches!(build_counterexample(0.0), Err(Error::Range(_))));
    assert!(matches!(build_counterexample(-1.0), Err(Error::Range(_))));
}

#[test]
fn right_angle_factor_is_minimal() {
    // L(π/2) is the minimal factor of diag(0, 1)
    let l = angle_factor(FRAC_PI_2);
    let mc = minimal_cholesky(&l.covariance(), PSD_TOL).unwrap();
    assert_mat_close(&mc.factor, l.as_matrix(), TOL);
}
