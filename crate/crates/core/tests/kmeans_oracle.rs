mod common;

use common::*;
use nalgebra::DMatrix;
use transnet::kmeans::{kmeans, KMeansConfig};
use transnet::Exec;

#[test]
fn restarts_reach_brute_force_optimum() {
    let mut r = rng(21);
    for trial in 0..12 {
        let (n, k) = if trial % 2 == 0 { (9, 3) } else { (12, 2) };
        let pts = random_matrix(n, 2, &mut r);
        let got = kmeans(&pts, k, &KMeansConfig::default(), trial, Exec::Sequential).unwrap();
        let best = brute_force_kmeans(&pts, k);
        assert!(
            (got.wcss - best).abs() < 1e-9 * best.max(1.0),
            "trial {trial}: {} vs {best}",
            got.wcss
        );
        assert!((wcss(&pts, &got.labels, k) - got.wcss).abs() < 1e-9);
    }
}

#[test]
fn separated_blobs_are_recovered() {
    let mut r = rng(22);
    let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
    let n = 60;
    let truth: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let pts = DMatrix::from_fn(n, 2, |i, c| {
        let (x, y) = centers[truth[i]];
        (if c == 0 { x } else { y }) + 0.3 * gaussian(&mut r)
    });
    let got = kmeans(&pts, 3, &KMeansConfig::default(), 5, Exec::Sequential).unwrap();
    assert_eq!(transnet::harness::misclassification_rate(&got.labels, &truth, 3), 0.0);
}

#[test]
fn parallel_and_sequential_restarts_agree() {
    let mut r = rng(23);
    let pts = random_matrix(80, 3, &mut r);
    let cfg = KMeansConfig::default();
    let a = kmeans(&pts, 4, &cfg, 99, Exec::Sequential).unwrap();
    let b = kmeans(&pts, 4, &cfg, 99, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn duplicate_rows_flag_degeneracy() {
    let pts = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 2.0]);
    let got = kmeans(&pts, 3, &KMeansConfig::default(), 0, Exec::Sequential).unwrap();
    assert!(got.degenerate);
    assert_eq!(got.labels.len(), 4);
}
