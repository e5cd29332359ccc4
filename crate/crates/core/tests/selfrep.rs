mod common;

use common::*;
use golfs::numcore::{l21_norm, solve_spd};
use golfs::selfrep::*;
use golfs::DenseMatrix;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn random_weights(g: &mut rand_chacha::ChaCha8Rng, d: usize, n: usize) -> IrlsWeights {
    IrlsWeights {
        feature: DVector::from_fn(d, |_, _| g.random_range(0.1..10.0)),
        sample: DVector::from_fn(n, |_, _| g.random_range(0.1..10.0)),
        floor: 1e-8,
    }
}

#[test]
fn spd_form_matches_row_scaled_form() {
    let mut g = rng(21);
    for _ in 0..50 {
        let n = g.random_range(3..10);
        let d = g.random_range(2..12);
        let x = gaussian(&mut g, n, d);
        let w = random_weights(&mut g, d, n);
        let kappa = g.random_range(0.05..5.0);
        let a = irls_update(&x, &w, kappa).unwrap();
        let b = irls_update_row_scaled(&x, &w, kappa).unwrap();
        assert!(rel_err(&a, &b) <= 1e-8);
    }
}

#[test]
fn unit_weights_give_ridge_solution() {
    let mut g = rng(3);
    let x = gaussian(&mut g, 6, 4);
    let w = IrlsWeights { feature: DVector::from_element(4, 1.0), sample: DVector::from_element(6, 1.0), floor: 1e-8 };
    let p = irls_update(&x, &w, 1.0).unwrap();
    // normal equations of min ||X' - X'P||^2 + ||P||^2, column by column
    let gram = &x * x.transpose();
    let oracle = (&gram + DenseMatrix::identity(6, 6)).lu().solve(&gram).unwrap();
    assert!(rel_err(&p, &oracle) <= 1e-10);
}

#[test]
fn larger_kappa_shrinks_coefficients() {
    let mut g = rng(9);
    let x = gaussian(&mut g, 5, 8);
    let w = random_weights(&mut g, 8, 5);
    let mut last = f64::INFINITY;
    for kappa in [0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
        let norm = irls_update(&x, &w, kappa).unwrap().norm();
        assert!(norm < last);
        last = norm;
    }
    assert!(last < 1e-2);
}

#[test]
fn first_step_decreases_objective() {
    let mut g = rng(12);
    let x = gaussian(&mut g, 10, 5);
    let config = SelfRepConfig { kappa: 0.5, ..Default::default() };
    let p1 = irls_step(&x, &DenseMatrix::zeros(10, 10), &config).unwrap();
    assert!(rsr_objective(&x, &p1, 0.5).unwrap() < rsr_objective(&x, &DenseMatrix::zeros(10, 10), 0.5).unwrap());
}

#[test]
fn traces_descend() {
    let mut g = rng(14);
    for kappa in [0.01, 0.1, 1.0, 10.0] {
        for _ in 0..5 {
            let x = gaussian(&mut g, 12, 20);
            let fit = solve_selfrep(&x, &SelfRepConfig { kappa, ..Default::default() }).unwrap();
            assert!(fit.max_relative_increase() <= 1e-8, "kappa {kappa}: {}", fit.max_relative_increase());
            let t = &fit.objective_trace; assert!(*t.last().unwrap() <= t[0] * (1.0 + 1e-8), "kappa {kappa}: {:?}", &t[..4.min(t.len())]);
            assert!(fit.iterations <= 50);
        }
    }
}

#[test]
fn duplicated_samples_are_linked() {
    let mut g = rng(30);
    let mut x = gaussian(&mut g, 8, 30);
    let row = x.row(0).into_owned();
    x.set_row(2, &row);
    let p = solve_selfrep(&x, &SelfRepConfig { kappa: 0.05, ..Default::default() }).unwrap().coefficients;
    let mut off: Vec<f64> = (0..8).flat_map(|i| (0..8).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| p[(i, j)].abs()).collect();
    off.sort_by(f64::total_cmp);
    let median = off[off.len() / 2];
    assert!(p[(0, 2)].abs() + p[(2, 0)].abs() > median);
}

#[test]
fn huge_penalty_gives_tiny_coefficients() {
    let mut g = rng(31);
    let x = gaussian(&mut g, 8, 5);
    let p = solve_selfrep(&x, &SelfRepConfig { kappa: 1e6, ..Default::default() }).unwrap().coefficients;
    assert!(p.norm() < 1e-3);
}

#[test]
fn scaling_x_keeps_the_weighted_solve() {
    let mut g = rng(32);
    let x = gaussian(&mut g, 6, 9);
    let w = random_weights(&mut g, 9, 6);
    // kappa = 0 with d > n keeps X G1 X' invertible
    let a = irls_update(&x, &w, 0.0).unwrap();
    let b = irls_update(&(&x * 3.0), &w, 0.0).unwrap();
    assert!(rel_err(&b, &a) <= 1e-8);
    let p = DenseMatrix::identity(6, 6) * 0.5;
    let r = rsr_objective(&x, &p, 0.0).unwrap();
    assert!((rsr_objective(&(&x * 3.0), &p, 0.0).unwrap() - 3.0 * r).abs() < 1e-10 * r);
}

#[test]
fn singular_system_advises_positive_kappa() {
    let mut g = rng(33);
    let x = gaussian(&mut g, 6, 2);
    let w = IrlsWeights { feature: DVector::from_element(2, 1.0), sample: DVector::from_element(6, 1.0), floor: 1e-8 };
    match irls_update(&x, &w, 0.0) {
        Err(golfs::Error::Singular { hint }) => assert!(hint.contains("kappa > 0")),
        other => panic!("expected a singular-system error, got {other:?}"),
    }
    assert!(solve_spd(&(&x * x.transpose()), &x).is_err());
}

proptest! {
    #[test]
    fn global_similarity_is_valid(seed in any::<u64>(), n in 1usize..9) {
        let mut g = rng(seed);
        let p = gaussian(&mut g, n, n);
        let s = global_similarity(&p).unwrap();
        let m = s.matrix();
        prop_assert_eq!(m, &m.transpose());
        prop_assert!(m.iter().all(|&v| v >= 0.0));
        prop_assert!(m.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weights_stay_in_range(seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = gaussian(&mut g, 5, 4);
        let p = gaussian(&mut g, 5, 5);
        let w = IrlsWeights::from_iterate(&x, &p, 1e-8).unwrap();
        prop_assert!(w.feature.iter().chain(w.sample.iter()).all(|&v| v > 0.0 && v <= 1e8));
        prop_assert!(l21_norm(&p) > 0.0);
    }
}
