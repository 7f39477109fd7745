//! Reference implementations used as oracles. Deliberately naive and
//! independent of the library's linear algebra paths.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transnet::spectral::Eigenspace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = r.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = r.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_matrix(n: usize, m: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| gaussian(r))
}

pub fn random_symmetric(n: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = random_matrix(n, n, r);
    (&a + a.transpose()) * 0.5
}

/// Classical Gram–Schmidt, twice for stability.
pub fn gram_schmidt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let d = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                let mut cj = q.column_mut(j);
                cj -= qi * d;
            }
            let norm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    q
}

/// Gram–Schmidt with each column's sign fixed so its diagonal coefficient
/// against the input is positive (the convention of a QR with `R_jj > 0`).
pub fn gram_schmidt_positive(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = gram_schmidt(m);
    for j in 0..q.ncols() {
        if q.column(j).dot(&m.column(j)) < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_orthonormal(n: usize, k: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    gram_schmidt(&random_matrix(n, k, r))
}

pub fn random_space(n: usize, k: usize, r: &mut ChaCha8Rng) -> Eigenspace {
    Eigenspace::new(random_orthonormal(n, k, r)).unwrap()
}

/// Cyclic Jacobi eigendecomposition; returns `(values, vectors)` unsorted.
pub fn jacobi_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let mut a = s.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() < 1e-22 * a.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Top-`k` eigenpairs by `key` (descending) from the Jacobi oracle.
pub fn jacobi_top_k(s: &DMatrix<f64>, k: usize, key: fn(f64) -> f64) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = jacobi_eigen(s);
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| key(vals[b]).total_cmp(&key(vals[a])));
    idx.truncate(k);
    (idx.iter().map(|&i| vals[i]).collect(), vecs.select_columns(&idx))
}

/// `‖UUᵀ − VVᵀ‖₂` from the explicit n×n difference.
pub fn dense_projection_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let d = u * u.transpose() - v * v.transpose();
    jacobi_eigen(&d).0.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Leading `k` eigenvectors of the full `U₀U₀ᵀ + λŪŪᵀ`.
pub fn dense_regularize(u0: &DMatrix<f64>, ub: &DMatrix<f64>, lambda: f64, k: usize) -> DMatrix<f64> {
    let m = u0 * u0.transpose() + ub * ub.transpose() * lambda;
    jacobi_top_k(&m, k, |x| x).1
}

pub fn wcss(points: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let d = points.ncols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &g) in labels.iter().enumerate() {
        counts[g] += 1;
        for c in 0..d {
            sums[g][c] += points[(i, c)];
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            (0..d)
                .map(|c| {
                    let m = sums[g][c] / counts[g] as f64;
                    (points[(i, c)] - m).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Exact k-means optimum by enumerating every labeling with all clusters
/// nonempty. Feasible for `k^n` up to a few hundred thousand.
pub fn brute_force_kmeans(points: &DMatrix<f64>, k: usize) -> f64 {
    let n = points.nrows();
    let total = k.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            best = best.min(wcss(points, &labels, k));
        }
    }
    best
}

pub fn random_labels(n: usize, k: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..k)).collect()
}
