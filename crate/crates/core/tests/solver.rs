mod common;

use common::*;
use golfs::graph::{knn_gaussian_similarity, laplacian, LaplacianMatrix, SimilarityMatrix};
use golfs::numcore::{standardize_columns, sym_eigen_smallest};
use golfs::solver::*;
use golfs::DenseMatrix;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn positive_d(g: &mut rand_chacha::ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| g.random_range(0.05..5.0))
}

fn normal_equations(x: &DenseMatrix, f: &DenseMatrix, d: &DVector<f64>, beta: f64) -> DenseMatrix {
    let a = x.transpose() * x + DenseMatrix::from_diagonal(d) * beta;
    a.lu().solve(&(x.transpose() * f)).unwrap()
}

fn block_laplacian(sizes: &[usize]) -> LaplacianMatrix {
    let n: usize = sizes.iter().sum();
    let mut s = DenseMatrix::zeros(n, n);
    let mut start = 0;
    for &size in sizes {
        for i in start..start + size {
            for j in start..start + size {
                if i != j {
                    s[(i, j)] = 1.0;
                }
            }
        }
        start += size;
    }
    laplacian(&SimilarityMatrix::new(s).unwrap())
}

fn toy_problem(seed: u64, n: usize, d: usize) -> (DenseMatrix, LaplacianMatrix, LaplacianMatrix, DenseMatrix) {
    let mut g = rng(seed);
    let x = gaussian(&mut g, n, d);
    let l0 = laplacian(&knn_gaussian_similarity(&x, 3, None).unwrap());
    let l1 = laplacian(&SimilarityMatrix::new(random_similarity(&mut g, n)).unwrap());
    let f0 = initial_pseudo_labels(&l0, &l1, 1.0, 3).unwrap();
    (x, l0, l1, f0)
}

#[test]
fn coefficient_update_matches_normal_equations_on_both_routes() {
    let mut g = rng(1);
    for (n, d) in [(12, 5), (10, 10), (6, 25)] {
        let x = gaussian(&mut g, n, d);
        let f = gaussian(&mut g, n, 3).abs();
        let dd = positive_d(&mut g, d);
        let w = update_w(&x, &f, &dd, 0.7).unwrap();
        let oracle = normal_equations(&x, &f, &dd, 0.7);
        assert!(rel_err(&w, &oracle) <= 1e-9, "n {n} d {d}");
        // stationarity: X'(XW - F) + beta D W = 0
        let grad = x.transpose() * (&x * &w - &f) + DenseMatrix::from_diagonal(&dd) * &w * 0.7;
        assert!(grad.norm() <= 1e-9 * (x.transpose() * &f).norm());
    }
}

#[test]
fn coefficient_update_limits() {
    let mut g = rng(2);
    let x = gaussian(&mut g, 8, 20);
    let f = gaussian(&mut g, 8, 2).abs();
    let ones = DVector::from_element(20, 1.0);
    assert!(update_w(&x, &f, &ones, 1e12).unwrap().norm() < 1e-9);

    let eye = DenseMatrix::identity(8, 8);
    let w = update_w(&eye, &f, &DVector::from_element(8, 1.0), 1e-10).unwrap();
    assert!(rel_err(&w, &f) <= 1e-8);
}

#[test]
fn m_matrix_is_bounded_and_gives_the_partial_minimum() {
    let mut g = rng(3);
    for (n, d) in [(15, 6), (7, 30)] {
        let x = gaussian(&mut g, n, d);
        let dd = positive_d(&mut g, d);
        let (alpha, beta) = (2.5, 0.3);
        let m = m_matrix(&x, &dd, alpha, beta).unwrap();
        let (values, _) = jacobi_eigen(&m);
        assert!(values.iter().all(|&v| v >= -1e-10 && v <= alpha + 1e-10), "{values:?}");

        let f = gaussian(&mut g, n, 3).abs();
        let w = update_w(&x, &f, &dd, beta).unwrap();
        let minimum = alpha
            * ((&x * &w - &f).norm_squared() + beta * (w.transpose() * DenseMatrix::from_diagonal(&dd) * &w).trace());
        let quad = (f.transpose() * &m * &f).trace();
        assert!((quad - minimum).abs() <= 1e-9 * minimum.abs().max(1.0));
    }
}

#[test]
fn pseudo_label_update_keeps_zeros_and_signs() {
    let (x, l0, l1, _) = toy_problem(4, 12, 6);
    let mut g = rng(5);
    let mut f = gaussian(&mut g, 12, 3).abs();
    f[(2, 1)] = 0.0;
    f[(7, 0)] = 0.0;
    let m = m_matrix(&x, &DVector::from_element(6, 1.0), 1.0, 1.0).unwrap();
    for rule in [FUpdateRule::Ratio, FUpdateRule::SquareRoot] {
        let next = update_f_with(&f, &l0, &l1, &m, 1.0, 1e8, 1e-10, rule);
        assert_eq!(next[(2, 1)], 0.0);
        assert_eq!(next[(7, 0)], 0.0);
        assert!(next.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }
    let zero = DenseMatrix::zeros(12, 3);
    assert_eq!(update_f(&zero, &l0, &l1, &m, 1.0, 1e8, 1e-10), zero);
}

#[test]
fn pseudo_label_update_fixes_a_stationary_point() {
    // with zero Laplacians and M, orthonormal nonnegative F balances gamma F against gamma F F'F
    let l = LaplacianMatrix::zeros(6);
    let m = DenseMatrix::zeros(6, 6);
    let mut f = DenseMatrix::zeros(6, 2);
    for i in 0..3 {
        f[(i, 0)] = 1.0 / 3f64.sqrt();
        f[(i + 3, 1)] = 1.0 / 3f64.sqrt();
    }
    for rule in [FUpdateRule::Ratio, FUpdateRule::SquareRoot] {
        let next = update_f_with(&f, &l, &l, &m, 1.0, 10.0, 1e-10, rule);
        assert!(rel_err(&next, &f) <= 1e-14);
    }
}

#[test]
fn objective_at_the_origin() {
    let (x, l0, l1, _) = toy_problem(6, 10, 4);
    let config = GolfsConfig { clusters: 3, gamma: 7.0, ..Default::default() };
    let v = transformed_objective(&x, &DenseMatrix::zeros(10, 3), &DenseMatrix::zeros(4, 3), &l0, &l1, &config).unwrap();
    assert!((v - 7.0 * 3.0 / 2.0).abs() <= 1e-12);
}

#[test]
fn fit_descends_with_bounded_trace() {
    for seed in 0..5 {
        let (x, l0, l1, f0) = toy_problem(10 + seed, 20, 15);
        let config = GolfsConfig { clusters: 3, max_iter: 40, ..Default::default() };
        let state = golfs_fit(&x, &l0, &l1, &config, &f0).unwrap();
        assert!(state.violations.is_empty(), "{:?}", state.violations);
        assert!(state.iterations <= 40);
        assert_eq!(state.objective_trace.len(), state.iterations + 1);
        assert_eq!(state.half_step_trace.len(), state.iterations);
        for (t, &h) in state.half_step_trace.iter().enumerate() {
            let prev = state.objective_trace[t];
            assert!(h <= prev + 1e-6 * prev.abs().max(1.0));
        }
        assert!(state.f.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn large_gamma_keeps_labels_near_orthonormal() {
    let (x, l0, l1, f0) = toy_problem(20, 24, 10);
    let config = GolfsConfig { clusters: 3, ..Default::default() };
    let state = golfs_fit(&x, &l0, &l1, &config, &f0).unwrap();
    let gram = state.f.transpose() * &state.f - DenseMatrix::identity(3, 3);
    assert!(gram.norm() <= 0.05, "{}", gram.norm());
}

#[test]
fn block_structure_is_recovered_without_local_graph() {
    let sizes = [10, 10, 10];
    let l1 = block_laplacian(&sizes);
    let mut g = rng(7);
    let x = gaussian(&mut g, 30, 8);
    let l0 = laplacian(&knn_gaussian_similarity(&x, 4, None).unwrap());
    let config = GolfsConfig { lambda: 0.0, clusters: 3, alpha: 0.01, ..Default::default() };
    // smallest eigenvectors of the block Laplacian span the indicators, perturb to break the rotation
    let eig = sym_eigen_smallest(l1.matrix(), 3).unwrap();
    let f0 = eig.vectors.abs().add_scalar(0.05);
    let state = golfs_fit(&x, &l0, &l1, &config, &f0).unwrap();
    let pred: Vec<usize> = (0..30).map(|i| state.f.row(i).transpose().argmax().0).collect();
    let truth = golfs::ClusterLabels::from_ids((0..30).map(|i| i / 10).collect());
    let acc = golfs::cluster_eval::acc(&truth, &golfs::ClusterLabels::from_ids(pred)).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn zero_lambda_ignores_the_local_graph() {
    let (x, l0, l1, f0) = toy_problem(8, 15, 6);
    let mut g = rng(9);
    let other = laplacian(&SimilarityMatrix::new(random_similarity(&mut g, 15)).unwrap());
    let config = GolfsConfig { lambda: 0.0, clusters: 3, max_iter: 20, ..Default::default() };
    let a = golfs_fit(&x, &l0, &l1, &config, &f0).unwrap();
    let b = golfs_fit(&x, &other, &l1, &config, &f0).unwrap();
    assert_eq!(a.f, b.f);
    assert_eq!(a.w, b.w);
}

#[test]
fn ranking_ignores_column_scale_after_standardizing() {
    let (x, l0, l1, f0) = toy_problem(11, 20, 8);
    let scales = DVector::from_fn(8, |j, _| 0.1 + j as f64 * 3.0);
    let scaled = &x * DenseMatrix::from_diagonal(&scales);
    let config = GolfsConfig { clusters: 3, max_iter: 30, ..Default::default() };
    let a = golfs_fit(&standardize_columns(&x), &l0, &l1, &config, &f0).unwrap();
    let b = golfs_fit(&standardize_columns(&scaled), &l0, &l1, &config, &f0).unwrap();
    assert_eq!(rank_features(&a.w).order, rank_features(&b.w).order);
}

#[test]
fn strict_mode_and_bad_input() {
    let (x, l0, l1, f0) = toy_problem(12, 10, 4);
    let config = GolfsConfig { clusters: 3, f_update: FUpdateRule::Ratio, strict_descent: true, ..Default::default() };
    match golfs_fit(&x, &l0, &l1, &config, &f0) {
        Ok(state) => assert!(state.violations.is_empty()),
        Err(e) => assert!(matches!(e, golfs::Error::NonMonotone { .. })),
    }
    let config = GolfsConfig { clusters: 3, ..Default::default() };
    let mut bad = f0.clone();
    bad[(0, 0)] = 0.0;
    assert!(golfs_fit(&x, &l0, &l1, &config, &bad).is_err());
    assert!(golfs_fit(&x, &l0, &l1, &GolfsConfig { clusters: 2, ..config }, &f0).is_err());
    assert!(golfs_fit(&x, &LaplacianMatrix::zeros(9), &l1, &config, &f0).is_err());
}

proptest! {
    #[test]
    fn ranking_is_sorted_by_row_norm(seed in any::<u64>(), d in 1usize..30) {
        let mut g = rng(seed);
        let w = gaussian(&mut g, d, 3);
        let r = rank_features(&w);
        let mut seen = r.order.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..d).collect::<Vec<_>>());
        for pair in r.order.windows(2) {
            prop_assert!(r.scores[pair[0]] >= r.scores[pair[1]]);
        }
    }

    #[test]
    fn reweighting_is_positive(seed in any::<u64>()) {
        let mut g = rng(seed);
        let mut w = gaussian(&mut g, 6, 2);
        w.row_mut(3).fill(0.0);
        let d = update_d(&w, 1e-8);
        prop_assert!(d.iter().all(|&v| v > 0.0 && v.is_finite()));
        prop_assert_eq!(d[3], 1.0 / 2e-8);
    }
}
