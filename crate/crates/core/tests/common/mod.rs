#![allow(dead_code)]

use golfs::{ClusterLabels, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let a = gaussian(rng, n, n);
    (&a + a.transpose()) * 0.5
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let m = gaussian(rng, n, n);
    m.transpose() * m + DenseMatrix::identity(n, n)
}

/// Random nonnegative symmetric weights with zero diagonal; roughly half the
/// pairs are connected.
pub fn random_similarity(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.5 {
                let w = rng.random::<f64>();
                s[(i, j)] = w;
                s[(j, i)] = w;
            }
        }
    }
    s
}

/// Random partition of `n` items into `c` non-empty groups.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, c: usize) -> ClusterLabels {
    let mut ids: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    ClusterLabels::new(ids, c).unwrap()
}

/// Cyclic Jacobi eigensolver; returns (values ascending, vectors as columns).
pub fn jacobi_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    (values, vectors)
}

/// Accuracy by trying every permutation of predicted ids.
pub fn brute_force_acc(truth: &ClusterLabels, pred: &ClusterLabels) -> f64 {
    let k = truth.clusters().max(pred.clusters());
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let hits = truth.ids().iter().zip(pred.ids()).filter(|(t, q)| p[**q] == **t).count();
        best = best.max(hits);
    });
    best as f64 / truth.len() as f64
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> ClusterLabels {
    ClusterLabels::new((0..n).map(|_| rng.random_range(0..c)).collect(), c).unwrap()
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
