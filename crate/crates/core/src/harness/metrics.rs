//! Misclassification rate up to label permutation, and the per-run metric
//! record written to `metrics.csv`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `k` solved by exhaustive permutation search.
pub const EXHAUSTIVE_MAX_K: usize = 8;

fn confusion(est: &[usize], truth: &[usize], k: usize) -> Vec<Vec<usize>> {
    assert_eq!(est.len(), truth.len(), "label vectors differ in length");
    let mut c = vec![vec![0usize; k]; k];
    for (&a, &b) in est.iter().zip(truth) {
        assert!(a < k && b < k, "label out of range for k={k}");
        c[a][b] += 1;
    }
    c
}

/// Fraction of nodes whose estimated community differs from the truth,
/// minimized over relabelings of the estimate.
pub fn misclassification_rate(est: &[usize], truth: &[usize], k: usize) -> f64 {
    if k <= EXHAUSTIVE_MAX_K {
        misclassification_exhaustive(est, truth, k)
    } else {
        misclassification_assignment(est, truth, k)
    }
}

pub fn misclassification_exhaustive(est: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = est.len();
    if n == 0 {
        return 0.0;
    }
    let c = confusion(est, truth, k);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits: usize = (0..k).map(|a| c[a][p[a]]).sum();
        best = best.max(hits);
    });
    1.0 - best as f64 / n as f64
}

fn permute(p: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// Optimal assignment on the confusion matrix (Hungarian method).
pub fn misclassification_assignment(est: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = est.len();
    if n == 0 {
        return 0.0;
    }
    let c = confusion(est, truth, k);
    let max = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = c
        .iter()
        .map(|row| row.iter().map(|&x| max - x as i64).collect())
        .collect();
    let assignment = hungarian(&cost);
    let hits: usize = assignment.iter().enumerate().map(|(a, &b)| c[a][b]).sum();
    1.0 - hits as f64 / n as f64
}

/// Minimum-cost perfect matching on a square matrix; returns the column
/// assigned to each row.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials, e-maxx formulation
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "TransNet-AdaW")]
    TransNetAdaW,
    #[serde(rename = "TransNet-EW")]
    TransNetEw,
    #[serde(rename = "Distributed SC")]
    DistributedSc,
    #[serde(rename = "Single SC")]
    SingleSc,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TransNetAdaW,
        Method::TransNetEw,
        Method::DistributedSc,
        Method::SingleSc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TransNetAdaW => "TransNet-AdaW",
            Method::TransNetEw => "TransNet-EW",
            Method::DistributedSc => "Distributed SC",
            Method::SingleSc => "Single SC",
        }
    }

    /// Short CLI code.
    pub fn code(self) -> &'static str {
        match self {
            Method::TransNetAdaW => "adaw",
            Method::TransNetEw => "ew",
            Method::DistributedSc => "dsc",
            Method::SingleSc => "ssc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(s) || m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// One method on one replication. Column order is the `metrics.csv` schema:
/// `method,L,case,rep,seed,proj_dist,misclass,lambda,seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: Method,
    #[serde(rename = "L")]
    pub l: usize,
    pub case: u8,
    pub rep: usize,
    pub seed: u64,
    pub proj_dist: f64,
    pub misclass: f64,
    /// Empty for methods without a regularization step.
    pub lambda: Option<f64>,
    pub seconds: f64,
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::csv(path, e))
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
