//! Randomized-response release, debiasing, and edge-DP accounting.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::BinaryNetwork;
use crate::rng::stream_rng;

/// Edge-preserving probabilities of randomized response:
/// `q = P(1 -> 1)` and `q' = P(0 -> 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    q: f64,
    q_prime: f64,
}

impl PrivacyParams {
    pub fn new(q: f64, q_prime: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&q_prime) {
            return Err(Error::Privacy {
                q,
                q_prime,
                reason: "probabilities must lie in [0, 1]",
            });
        }
        Ok(Self { q, q_prime })
    }

    /// `q = q'`.
    pub fn symmetric(q: f64) -> Result<Self> {
        Self::new(q, q)
    }

    /// No perturbation.
    pub fn identity() -> Self {
        Self { q: 1.0, q_prime: 1.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q_prime(&self) -> f64 {
        self.q_prime
    }

    /// `q + q' - 1`, the debiasing denominator.
    pub fn signal_scale(&self) -> f64 {
        self.q + self.q_prime - 1.0
    }

    pub fn check_debiasable(&self) -> Result<()> {
        if self.signal_scale() > 0.0 {
            Ok(())
        } else {
            Err(Error::Privacy {
                q: self.q,
                q_prime: self.q_prime,
                reason: "debiasing requires q + q' > 1",
            })
        }
    }
}

/// Perturb each upper-triangle entry independently, then mirror.
pub fn randomized_response(a: &BinaryNetwork, params: PrivacyParams, seed: u64) -> BinaryNetwork {
    let n = a.n();
    let mut rng = stream_rng(seed, 0);
    let mut out = BinaryNetwork::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            let on = if a.has_edge(i, j) {
                u < params.q
            } else {
                u >= params.q_prime
            };
            if on {
                out.set(i, j, true);
            }
        }
    }
    out
}

/// Real symmetric matrix built from a released network.
///
/// With `debiased = true` this is the bias-adjusted matrix
/// `(Ã - (1-q')(11ᵀ - I)) / (q + q' - 1)`, which has conditional mean equal
/// to the unperturbed adjacency. With `debiased = false` it holds `Ã` as is.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedNetwork {
    mat: DMatrix<f64>,
    params: PrivacyParams,
    debiased: bool,
}

impl DebiasedNetwork {
    /// Wrap an arbitrary symmetric matrix (e.g. an exact population matrix).
    pub fn from_matrix(mat: DMatrix<f64>, params: PrivacyParams) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension("matrix must be square".into()));
        }
        Ok(Self {
            mat,
            params,
            debiased: true,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn params(&self) -> PrivacyParams {
        self.params
    }

    pub fn is_debiased(&self) -> bool {
        self.debiased
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }
}

pub fn debias(a_tilde: &BinaryNetwork, params: PrivacyParams) -> Result<DebiasedNetwork> {
    params.check_debiasable()?;
    let scale = params.signal_scale();
    let lo = -(1.0 - params.q_prime) / scale;
    let hi = params.q_prime / scale;
    let n = a_tilde.n();
    let mat = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if a_tilde.has_edge(i, j) {
            hi
        } else {
            lo
        }
    });
    Ok(DebiasedNetwork {
        mat,
        params,
        debiased: true,
    })
}

/// Debias, or for the ablation keep the released matrix unchanged.
pub fn prepare(a_tilde: &BinaryNetwork, params: PrivacyParams, debiased: bool) -> Result<DebiasedNetwork> {
    if debiased {
        debias(a_tilde, params)
    } else {
        Ok(DebiasedNetwork {
            mat: a_tilde.to_matrix(),
            params,
            debiased: false,
        })
    }
}

/// Symmetric choice `q = q' = e^ε / (1 + e^ε)`.
pub fn epsilon_to_q(eps: f64) -> Result<PrivacyParams> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "privacy budget must be positive, got {eps}"
        )));
    }
    let q = 1.0 / (1.0 + (-eps).exp());
    PrivacyParams::symmetric(q)
}

/// Smallest ε for which randomized response with these parameters is
/// ε-edge-DP: the log of the largest likelihood ratio.
pub fn q_to_epsilon(params: PrivacyParams) -> Result<f64> {
    let (q, qp) = (params.q, params.q_prime);
    if q <= 0.0 || q >= 1.0 || qp <= 0.0 || qp >= 1.0 {
        return Err(Error::Privacy {
            q,
            q_prime: qp,
            reason: "likelihood ratios undefined when q or q' is 0 or 1 (no finite epsilon)",
        });
    }
    let ratios = [qp / (1.0 - q), (1.0 - q) / qp, (1.0 - qp) / q, q / (1.0 - qp)];
    let max = ratios.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(max.ln())
}
