use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ttcirc_core::fit::*;
use ttcirc_core::linalg::{self, CMat, C64};
use ttcirc_core::stiefel::{project_tangent, retract, AdamConfig, RiemannianAdam};
use ttcirc_core::tt::{tt_svd_matrix, TTMatrix};
use ttcirc_core::zoo;

fn haar_mpo(n: usize, rank: usize, seed: u64) -> UnitaryMPO {
    init_unitary_mpo(&zoo::identity_mpo(n).unwrap(), rank, InitStrategy::RandomHaar, seed).unwrap()
}

fn dense_cost(a: &TTMatrix, c: f64, m: &TTMatrix) -> f64 {
    let diff = a.to_dense().unwrap() * C64::new(c, 0.0) - m.to_dense().unwrap();
    diff.norm_squared()
}

fn singular_values(a: &CMat) -> Vec<f64> {
    linalg::svd(a).1
}

#[test]
fn cost_matches_dense_oracle() {
    let a = haar_mpo(4, 4, 1).mpo;
    for m in [zoo::laplace_mpo(4).unwrap(), zoo::ising_mpo(&zoo::IsingParams::new(4)).unwrap()] {
        for c in [0.3, 1.0, 2.5] {
            let (tt, dense) = (cost(&a, c, &m).unwrap(), dense_cost(&a, c, &m));
            assert!((tt - dense).abs() <= 1e-10 * dense.max(1.0), "{tt} vs {dense}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let n = 4;
    let a = haar_mpo(n, 4, 2).mpo;
    let m = zoo::laplace_mpo(n).unwrap();
    let c = 1.7;
    let h = 1e-6;
    for k in 0..n {
        let g = euclidean_gradient(&a, c, &m, k).unwrap();
        let perturbed = |i: usize, dz: C64| {
            let mut cores = a.cores().to_vec();
            cores[k].data[i] += dz;
            cost(&TTMatrix::new(cores).unwrap(), c, &m).unwrap()
        };
        for i in 0..g.data.len() {
            let d_re = (perturbed(i, C64::new(h, 0.0)) - perturbed(i, C64::new(-h, 0.0))) / (2.0 * h);
            let d_im = (perturbed(i, C64::new(0.0, h)) - perturbed(i, C64::new(0.0, -h))) / (2.0 * h);
            let fd = C64::new(d_re, d_im) / 2.0;
            let rel = (fd - g.data[i]).norm() / g.data[i].norm().max(1.0);
            assert!(rel <= 1e-5, "core {k} entry {i}: fd {fd} analytic {}", g.data[i]);
        }
    }
}

#[test]
fn c_update_is_stationary() {
    let a = haar_mpo(4, 2, 3).mpo;
    let m = zoo::mct_mpo(4).unwrap();
    let c = update_c(&a, &m).unwrap();
    let h = 1e-5;
    let slope = (cost(&a, c + h, &m).unwrap() - cost(&a, c - h, &m).unwrap()) / (2.0 * h);
    assert!(slope.abs() < 1e-6, "{slope}");
    assert!(cost(&a, c, &m).unwrap() <= cost(&a, c * 1.01, &m).unwrap());
    assert!(cost(&a, c, &m).unwrap() <= cost(&a, c * 0.99, &m).unwrap());
}

fn local_unitaries(n: usize, seed: u64) -> TTMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = (0..n).fold(linalg::identity(1), |acc, _| linalg::kron(&acc, &linalg::haar_isometry(2, 2, &mut rng)));
    tt_svd_matrix(&dense, 1e-14).unwrap()
}

#[test]
fn polar_init_recovers_unitary_targets() {
    let targets = [(zoo::identity_mpo(5).unwrap(), 1), (local_unitaries(4, 4), 1), (local_unitaries(5, 5), 2)];
    for (i, (target, rank)) in targets.iter().enumerate() {
        let u = init_unitary_mpo(target, *rank, InitStrategy::PolarFromTarget, 0).unwrap();
        let eps = cost(&u.mpo, u.c, target).unwrap() / target.frobenius_norm().powi(2);
        assert!(eps <= 1e-10, "target {i}: {eps}");
        assert!((u.c - 1.0).abs() <= 1e-6, "target {i}: c = {}", u.c);
        assert!(u.isometry_deviation() <= 1e-10);
    }
}

#[test]
fn polar_init_recovers_isometric_chains() {
    for (n, rank, seed) in [(3usize, 2usize, 4u64), (4, 2, 5), (4, 4, 6), (5, 4, 7), (6, 2, 8)] {
        let target = haar_mpo(n, rank, seed).mpo;
        let u = init_unitary_mpo(&target, rank, InitStrategy::PolarFromTarget, 0).unwrap();
        let eps = cost(&u.mpo, u.c, &target).unwrap() / target.frobenius_norm().powi(2);
        assert!(eps <= 1e-10, "n={n} R={rank}: {eps}");
        assert!((u.c - 1.0).abs() <= 1e-6, "n={n} R={rank}: c = {}", u.c);
    }
}

#[test]
fn fit_reaches_exact_unitary_targets() {
    for (target, rank) in [(local_unitaries(5, 9), 2), (haar_mpo(4, 4, 10).mpo, 4)] {
        let (a, rep) = fit_unitary_mpo(&target, &FitOptions { rank, max_iters: 50, ..Default::default() }).unwrap();
        assert!(rep.epsilon <= 1e-10, "{}", rep.epsilon);
        assert!((a.c - 1.0).abs() <= 1e-6, "{}", a.c);
    }
}

#[test]
fn fit_is_deterministic_and_never_worse_than_init() {
    let m = zoo::laplace_mpo(4).unwrap();
    let opts = FitOptions { rank: 4, max_iters: 200, seed: 9, init: InitStrategy::RandomHaar, ..Default::default() };
    let (a1, r1) = fit_unitary_mpo(&m, &opts).unwrap();
    let (a2, r2) = fit_unitary_mpo(&m, &opts).unwrap();
    assert_eq!(a1, a2);
    assert_eq!(r1, r2);
    let first = r1.cost_history[0];
    let last = cost(&a1.mpo, a1.c, &m).unwrap();
    assert!(last <= first, "{last} > {first}");
    assert!((r1.epsilon - last / m.frobenius_norm().powi(2)).abs() < 1e-10);
    assert!(r1.epsilon < 0.5 * first / m.frobenius_norm().powi(2));
    assert!(a1.isometry_deviation() <= 1e-10);
    assert_eq!(r1.cost_history.len(), r1.c_history.len());
}

#[test]
fn fixed_c_is_held() {
    let m = zoo::laplace_mpo(3).unwrap();
    let opts = FitOptions { rank: 2, max_iters: 50, fixed_c: Some(5.0), ..Default::default() };
    let (a, rep) = fit_unitary_mpo(&m, &opts).unwrap();
    assert!((a.c - 5.0).abs() < 1e-12);
    assert!(rep.c_history.iter().all(|&c| (c - 5.0).abs() < 1e-12));
}

#[test]
fn zero_learning_rate_keeps_init() {
    let m = zoo::laplace_mpo(3).unwrap();
    let opts = FitOptions { rank: 2, max_iters: 20, learning_rate: 0.0, final_learning_rate: 0.0, ..Default::default() };
    let (a, rep) = fit_unitary_mpo(&m, &opts).unwrap();
    let nm = m.frobenius_norm();
    let init = init_unitary_mpo(&m.scale(C64::new(1.0 / nm, 0.0)), 2, opts.init, opts.seed).unwrap();
    assert!(linalg::max_abs_diff(&a.mpo.to_dense().unwrap(), &init.mpo.to_dense().unwrap()) < 1e-14);
    assert!(rep.cost_history.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
}

#[test]
fn adam_step_descends() {
    // minimize ‖V − T‖² over St(6, 2) from a generic start
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t = linalg::haar_isometry(6, 2, &mut rng);
    let mut pts = vec![linalg::haar_isometry(6, 2, &mut rng)];
    let loss = |v: &CMat| (v - &t).norm_squared();
    let mut adam = RiemannianAdam::new(AdamConfig { learning_rate: 0.01, ..Default::default() }, &[(6, 2)]);
    let start = loss(&pts[0]);
    let grad = (&pts[0] - &t) * C64::new(2.0, 0.0);
    adam.step(&mut pts, &[grad]).unwrap();
    assert!(loss(&pts[0]) < start);
    for _ in 0..500 {
        let grad = (&pts[0] - &t) * C64::new(2.0, 0.0);
        adam.step(&mut pts, &[grad]).unwrap();
    }
    assert!(loss(&pts[0]) < 1e-3 * start, "{}", loss(&pts[0]));
    assert_eq!(adam.steps_taken(), 501);
}

#[test]
fn fit_rejects_bad_input() {
    let m = zoo::laplace_mpo(3).unwrap();
    assert!(fit_unitary_mpo(&m, &FitOptions { rank: 3, ..Default::default() }).is_err());
    assert!(fit_unitary_mpo(&m.scale(C64::new(0.0, 0.0)), &FitOptions::default()).is_err());
    assert!(fit_unitary_mpo(&m, &FitOptions { fixed_c: Some(-1.0), ..Default::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_lands_in_tangent_space(m in 2usize..9, p in 1usize..5, seed in 0u64..1000) {
        let p = p.min(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = linalg::haar_isometry(m, p, &mut rng);
        let g = linalg::gaussian(m, p, &mut rng);
        let xi = project_tangent(&v, &g).unwrap();
        let skew = v.adjoint() * &xi + xi.adjoint() * &v;
        prop_assert!(skew.iter().all(|z| z.norm() < 1e-12));
        let twice = project_tangent(&v, &xi).unwrap();
        prop_assert!(linalg::max_abs_diff(&twice, &xi) < 1e-12);
    }

    #[test]
    fn retraction_stays_on_manifold(m in 2usize..9, p in 1usize..5, seed in 0u64..1000, alpha in -2.0f64..2.0) {
        let p = p.min(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = linalg::haar_isometry(m, p, &mut rng);
        let xi = project_tangent(&v, &linalg::gaussian(m, p, &mut rng)).unwrap();
        let w = retract(&v, &xi, alpha).unwrap();
        prop_assert!(linalg::gram_deviation(&w) <= 1e-10);
    }

    #[test]
    fn unitary_mpos_are_contractions(n in 2usize..6, r in 0u32..3, seed in 0u64..1000) {
        let u = haar_mpo(n, 1 << r, seed);
        prop_assert!(u.isometry_deviation() <= 1e-10);
        let s = singular_values(&u.mpo.to_dense().unwrap());
        prop_assert!(s[0] <= 1.0 + 1e-8, "{}", s[0]);
        prop_assert!(u.avg_success() <= 1.0 + 1e-10);
    }

    #[test]
    fn short_fits_keep_isometry(seed in 0u64..1000, r in 0u32..3) {
        let m = zoo::laplace_mpo(3).unwrap();
        let opts = FitOptions { rank: 1 << r, max_iters: 30, seed, init: InitStrategy::RandomHaar, ..Default::default() };
        let (a, rep) = fit_unitary_mpo(&m, &opts).unwrap();
        prop_assert!(a.isometry_deviation() <= 1e-10);
        prop_assert!(singular_values(&a.mpo.to_dense().unwrap())[0] <= 1.0 + 1e-8);
        prop_assert!(rep.epsilon <= rep.cost_history[0] / m.frobenius_norm().powi(2) + 1e-12);
    }
}

