//! Lloyd's k-means on the rows of an embedding, k-means++ seeding,
//! best-of-restarts.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the relative WCSS improvement falls below this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    /// Fewer than `k` distinct rows in the input.
    pub degenerate: bool,
}

/// Row-major point set.
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster the rows of `m` into `k` groups.
pub fn kmeans(m: &DMatrix<f64>, k: usize, cfg: &KMeansConfig, seed: u64, exec: Exec) -> Result<KMeansResult> {
    let n = m.nrows();
    let dim = m.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} out of range for {n} rows")));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("need at least one restart".into()));
    }
    let data: Vec<f64> = (0..n).flat_map(|i| (0..dim).map(move |j| m[(i, j)])).collect();
    let pts = Points { data: &data, dim };
    let degenerate = distinct_rows(&pts) < k;

    let runs = exec.map_range(cfg.restarts, |r| lloyd(&pts, k, cfg, seed, r as u64));
    let mut best = None::<(Vec<usize>, Vec<Vec<f64>>, f64)>;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (labels, centroids, wcss) = best.expect("at least one restart");
    Ok(KMeansResult {
        labels,
        centroids,
        wcss,
        degenerate,
    })
}

fn distinct_rows(pts: &Points) -> usize {
    let mut rows: Vec<Vec<u64>> = (0..pts.len())
        .map(|i| pts.row(i).iter().map(|x| x.to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn kmeans_pp(pts: &Points, k: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let n = pts.len();
    let mut centers = vec![pts.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(pts.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = pts.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(pts.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(pts: &Points, centers: &[Vec<f64>], labels: &mut [usize]) {
    for (i, label) in labels.iter_mut().enumerate() {
        let row = pts.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(row, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *label = best;
    }
}

/// Recompute centroids; an empty cluster takes over the point farthest from
/// its current centroid (among clusters with more than one member).
fn update(pts: &Points, k: usize, labels: &mut [usize], centers: &mut [Vec<f64>]) {
    let dim = pts.dim;
    loop {
        let mut counts = vec![0usize; k];
        for &g in labels.iter() {
            counts[g] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let mut far = None::<(usize, f64)>;
        for (i, &g) in labels.iter().enumerate() {
            if counts[g] > 1 {
                let d = sq_dist(pts.row(i), &centers[g]);
                if far.is_none_or(|(_, fd)| d > fd) {
                    far = Some((i, d));
                }
            }
        }
        let Some((i, _)) = far else { break };
        labels[i] = empty;
        centers[empty] = pts.row(i).to_vec();
    }
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &g) in labels.iter().enumerate() {
        counts[g] += 1;
        for (s, x) in sums[g].iter_mut().zip(pts.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
}

fn wcss(pts: &Points, labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(pts.row(i), &centers[g]))
        .sum()
}

fn lloyd(pts: &Points, k: usize, cfg: &KMeansConfig, seed: u64, restart: u64) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let mut rng = stream_rng(seed, restart);
    let mut centers = kmeans_pp(pts, k, &mut rng);
    let mut labels = vec![0usize; pts.len()];
    let mut prev = f64::INFINITY;
    let mut cost = f64::INFINITY;
    for _ in 0..cfg.max_iter.max(1) {
        assign(pts, &centers, &mut labels);
        update(pts, k, &mut labels, &mut centers);
        cost = wcss(pts, &labels, &centers);
        if prev.is_finite() && prev - cost <= cfg.tol * prev {
            break;
        }
        prev = cost;
    }
    (labels, centers, cost)
}
