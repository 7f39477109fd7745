//! Per-source density and heterogeneity estimates, and the weight vectors
//! built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{DebiasedNetwork, PrivacyParams};
use crate::spectral::{projection_distance, Eigenspace};
use nalgebra::DMatrix;

/// Debiased edge density `Σ_{i≠j} Â_ij / (n(n-1))`, floored at `1/(n(n-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

pub fn estimate_density(a_hat: &DebiasedNetwork) -> DensityEstimate {
    density_of_matrix(a_hat.matrix())
}

pub fn density_of_matrix(m: &DMatrix<f64>) -> DensityEstimate {
    let n = m.nrows();
    assert!(n >= 2, "density needs at least two nodes");
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                sum += m[(i, j)];
            }
        }
    }
    let pairs = (n * (n - 1)) as f64;
    let raw = sum / pairs;
    let floor = 1.0 / pairs;
    if raw < floor {
        DensityEstimate {
            value: floor,
            raw,
            clamped: true,
        }
    } else {
        DensityEstimate {
            value: raw,
            raw,
            clamped: false,
        }
    }
}

/// Heterogeneity of a source relative to the target: the projection
/// distance between their estimated eigenspaces.
pub fn estimate_heterogeneity(u_l: &Eigenspace, u_0: &Eigenspace) -> Result<f64> {
    projection_distance(u_l, u_0)
}

/// What the coordinator knows about one source when weighting it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceStats {
    pub rho_hat: f64,
    pub e_theta_hat: f64,
    pub params: PrivacyParams,
    pub n: usize,
    pub l: usize,
}

impl SourceStats {
    /// Privacy/sampling term `[(q+q'-1)ρ̂ + 1 - q'] · ln n / (n ρ̂²)`.
    pub fn privacy_term(&self) -> f64 {
        let p = self.params;
        let n = self.n as f64;
        (p.signal_scale() * self.rho_hat + 1.0 - p.q_prime()) * n.ln() / (n * self.rho_hat * self.rho_hat)
    }

    /// Heterogeneity term `Ê² · L`.
    pub fn heterogeneity_term(&self, l_count: usize) -> f64 {
        self.e_theta_hat * self.e_theta_hat * l_count as f64
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("weights sum to {s}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighting strategy for the aggregation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightingMode {
    Equal,
    /// Max-normalized privacy and heterogeneity terms.
    #[default]
    AdaptivePractical,
    /// Raw inverse of the full error bound, with a density plug-in.
    AdaptiveTheoretical,
}

pub fn equal_weights(l_count: usize) -> Result<WeightVector> {
    if l_count == 0 {
        return Err(Error::InvalidParameter("need at least one source".into()));
    }
    normalize_inverse(&vec![1.0; l_count])
}

/// `w_l ∝ 1/d_l`, normalized.
pub(crate) fn normalize_inverse(denominators: &[f64]) -> Result<WeightVector> {
    let inv: Vec<f64> = denominators
        .iter()
        .map(|&d| {
            assert!(d > 0.0 && d.is_finite(), "weight denominator {d} is not positive");
            1.0 / d
        })
        .collect();
    let total: f64 = inv.iter().sum();
    WeightVector::new(inv.into_iter().map(|x| x / total).collect())
}

pub fn adaptive_weights_theoretical(stats: &[SourceStats], rho_plugin: f64) -> Result<WeightVector> {
    if stats.is_empty() {
        return Err(Error::InvalidParameter("need at least one source".into()));
    }
    if !(rho_plugin > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "density plug-in must be positive, got {rho_plugin}"
        )));
    }
    let l_count = stats.len();
    let d: Vec<f64> = stats
        .iter()
        .map(|s| s.privacy_term() + s.heterogeneity_term(l_count) + l_count as f64 / (s.n as f64 * rho_plugin))
        .collect();
    normalize_inverse(&d)
}

pub fn adaptive_weights_practical(stats: &[SourceStats]) -> Result<WeightVector> {
    if stats.is_empty() {
        return Err(Error::InvalidParameter("need at least one source".into()));
    }
    let l_count = stats.len();
    let a: Vec<f64> = stats.iter().map(SourceStats::privacy_term).collect();
    let b: Vec<f64> = stats.iter().map(|s| s.heterogeneity_term(l_count)).collect();
    practical_from_terms(&a, &b)
}

/// `w_l ∝ (a_l / max a + b_l / max b)⁻¹`; a term whose maximum is zero is dropped.
pub(crate) fn practical_from_terms(a: &[f64], b: &[f64]) -> Result<WeightVector> {
    let max_a = a.iter().copied().fold(0.0, f64::max);
    let max_b = b.iter().copied().fold(0.0, f64::max);
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            let ta = if max_a > 0.0 { ai / max_a } else { 0.0 };
            let tb = if max_b > 0.0 { bi / max_b } else { 0.0 };
            ta + tb
        })
        .collect();
    if d.iter().all(|&x| x == 0.0) {
        return equal_weights(a.len());
    }
    if d.contains(&0.0) {
        // a source with both terms exactly zero is a perfect copy of the target
        let hits: Vec<f64> = d.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
        let count: f64 = hits.iter().sum();
        return WeightVector::new(hits.into_iter().map(|x| x / count).collect());
    }
    normalize_inverse(&d)
}
