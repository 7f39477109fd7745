//! Heterogeneous multi-layer stochastic block model generation and the
//! simulation scenarios built on top of it.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::privacy::{randomized_response, PrivacyParams};
use crate::rng::{derive_seed, stream_rng};

/// Community assignment of `n` nodes into `k` communities.
///
/// Stored as a label vector; the one-hot membership matrix is available via
/// [`Membership::to_matrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    labels: Vec<usize>,
    k: usize,
}

impl Membership {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&g| g >= k) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range for k={k}")));
        }
        Ok(Self { labels, k })
    }

    /// Contiguous blocks; when `k` does not divide `n` the first
    /// `n mod k` communities get one extra node.
    pub fn balanced(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "cannot split {n} nodes into {k} communities"
            )));
        }
        let base = n / k;
        let extra = n % k;
        let labels = (0..k)
            .flat_map(|c| std::iter::repeat_n(c, base + usize::from(c < extra)))
            .collect();
        Ok(Self { labels, k })
    }

    /// Parse a one-hot membership matrix.
    pub fn from_matrix(theta: &DMatrix<f64>) -> Result<Self> {
        let k = theta.ncols();
        let mut labels = Vec::with_capacity(theta.nrows());
        for (i, row) in theta.row_iter().enumerate() {
            let ones: Vec<usize> = (0..k).filter(|&c| row[c] == 1.0).collect();
            let zeros = (0..k).filter(|&c| row[c] == 0.0).count();
            if ones.len() != 1 || zeros != k - 1 {
                return Err(Error::InvalidParameter(format!(
                    "row {i} of the membership matrix is not one-hot"
                )));
            }
            labels.push(ones[0]);
        }
        Self::new(labels, k)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k, |i, c| if self.labels[i] == c { 1.0 } else { 0.0 })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &g in &self.labels {
            sizes[g] += 1;
        }
        sizes
    }

    /// Number of nodes whose label differs.
    pub fn hamming(&self, other: &Membership) -> usize {
        self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count()
    }
}

/// One layer's SBM: membership `theta`, connectivity `b`, layer index.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    theta: Membership,
    b: DMatrix<f64>,
    label: usize,
}

impl SbmSpec {
    pub fn new(theta: Membership, b: DMatrix<f64>, label: usize) -> Result<Self> {
        if !b.is_square() || b.nrows() != theta.k() {
            return Err(Error::Dimension(format!(
                "connectivity is {}x{} but membership has k={}",
                b.nrows(),
                b.ncols(),
                theta.k()
            )));
        }
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                let v = b[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "connectivity entry ({i},{j}) = {v} outside [0,1]"
                    )));
                }
                if v != b[(j, i)] {
                    return Err(Error::InvalidParameter("connectivity matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self { theta, b, label })
    }

    pub fn theta(&self) -> &Membership {
        &self.theta
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n(&self) -> usize {
        self.theta.n()
    }

    pub fn k(&self) -> usize {
        self.theta.k()
    }

    /// Edge probability between nodes `i` and `j`.
    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.b[(self.theta.labels[i], self.theta.labels[j])]
    }

    /// Population matrix `Θ B Θᵀ` (diagonal included).
    pub fn population(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.prob(i, j))
    }
}

/// Symmetric binary adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryNetwork {
    n: usize,
    adj: Vec<u8>,
}

impl BinaryNetwork {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![0; n * n] }
    }

    /// Build from an undirected edge list. Self-loops are ignored and
    /// duplicates collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut net = Self::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i != j {
                net.set(i, j, true);
            }
        }
        Ok(net)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] != 0
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, on: bool) {
        debug_assert_ne!(i, j);
        let v = u8::from(on);
        self.adj[i * self.n + j] = v;
        self.adj[j * self.n + i] = v;
    }

    /// Edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter_map(move |j| self.has_edge(i, j).then_some((i, j))))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Edge count over `n(n-1)/2`.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(self.adj[i * self.n + j]))
    }

    pub fn is_symmetric_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| {
            self.adj[i * self.n + i] == 0
                && (i + 1..self.n).all(|j| self.adj[i * self.n + j] == self.adj[j * self.n + i])
        })
    }
}

/// Draw `A_ij ~ Bernoulli(P_ij)` independently for `i < j` and mirror.
pub fn generate_sbm(spec: &SbmSpec, seed: u64) -> BinaryNetwork {
    let n = spec.n();
    let mut rng = stream_rng(seed, 0);
    let mut net = BinaryNetwork::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < spec.prob(i, j) {
                net.set(i, j, true);
            }
        }
    }
    net
}

/// Relabel `⌊mu_frac · size⌋` nodes of every community, each moving to a
/// uniformly chosen different community.
pub fn perturb_membership(theta0: &Membership, mu_frac: f64, seed: u64) -> Result<Membership> {
    if !(0.0..=1.0).contains(&mu_frac) {
        return Err(Error::InvalidParameter(format!(
            "perturbation proportion {mu_frac} outside [0,1]"
        )));
    }
    let k = theta0.k();
    if k < 2 {
        return Err(Error::InvalidParameter("membership perturbation needs k >= 2".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut labels = theta0.labels.clone();
    for c in 0..k {
        let members: Vec<usize> = (0..theta0.n()).filter(|&i| theta0.labels[i] == c).collect();
        // small slack so that e.g. 0.29 * 100 floors to 29
        let count = ((mu_frac * members.len() as f64) + 1e-9).floor() as usize;
        let count = count.min(members.len());
        for pick in index::sample(&mut rng, members.len(), count) {
            let node = members[pick];
            let r = rng.random_range(0..k - 1);
            labels[node] = if r >= c { r + 1 } else { r };
        }
    }
    Membership::new(labels, k)
}

/// Simulation set-up for one experiment case.
///
/// Matrices are stored as nested rows so the struct round-trips through
/// plain config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: u8,
    #[serde(default)]
    pub case: u8,
    pub n: usize,
    pub k: usize,
    /// Number of source networks.
    pub l: usize,
    pub b0: Vec<Vec<f64>>,
    /// Connectivity of the four source groups.
    pub group_b: Vec<Vec<Vec<f64>>>,
    /// Membership-perturbation proportion per group.
    pub mu: [f64; 4],
    /// Edge-preserving probability per group (q = q').
    pub q: [f64; 4],
    pub q0: f64,
    pub reps: usize,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 42;

fn b0_rows() -> Vec<Vec<f64>> {
    vec![vec![0.3, 0.1, 0.0], vec![0.1, 0.3, 0.06], vec![0.0, 0.06, 0.3]]
}

fn group_rows() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![0.3, 0.1, 0.1], vec![0.1, 0.3, 0.06], vec![0.1, 0.06, 0.3]],
        vec![vec![0.3, 0.1, 0.0], vec![0.1, 0.2, 0.06], vec![0.0, 0.06, 0.2]],
        vec![vec![0.3, 0.1, 0.0], vec![0.1, 0.3, 0.1], vec![0.0, 0.1, 0.3]],
        vec![vec![0.3, 0.15, 0.0], vec![0.15, 0.3, 0.06], vec![0.0, 0.06, 0.3]],
    ]
}

impl ExperimentConfig {
    /// The three experiments (private / heterogeneous / both) and their
    /// three cases, at n=120, K=3, L=24, 10 replications.
    pub fn preset(experiment: u8, case: u8) -> Result<Self> {
        let (mu, q, q0) = match (experiment, case) {
            (1, 1) => ([0.0; 4], [0.95, 0.95, 0.7, 0.7], 0.95),
            (1, 2) => ([0.0; 4], [0.95, 0.95, 0.8, 0.8], 0.95),
            (1, 3) => ([0.0; 4], [0.8; 4], 0.95),
            (2, 1) => ([0.02, 0.02, 0.5, 0.5], [1.0; 4], 1.0),
            (2, 2) => ([0.02, 0.02, 0.3, 0.3], [1.0; 4], 1.0),
            (2, 3) => ([0.3; 4], [1.0; 4], 1.0),
            (3, 1) => ([0.02, 0.02, 0.5, 0.5], [0.95, 0.95, 0.7, 0.7], 0.95),
            (3, 2) => ([0.1, 0.1, 0.5, 0.5], [0.95, 0.95, 0.7, 0.7], 0.95),
            (3, 3) => ([0.02, 0.02, 0.5, 0.5], [0.8, 0.8, 0.95, 0.95], 0.95),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "no preset for experiment {experiment} case {case}"
                )))
            }
        };
        Ok(Self {
            experiment,
            case,
            n: 120,
            k: 3,
            l: 24,
            b0: b0_rows(),
            group_b: group_rows(),
            mu,
            q,
            q0,
            reps: 10,
            seed: DEFAULT_SEED,
        })
    }

    pub fn with_l(&self, l: usize) -> Self {
        Self { l, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 source networks, got L={}",
                self.l
            )));
        }
        if self.k < 2 || self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "invalid k={} for n={}",
                self.k, self.n
            )));
        }
        if self.group_b.len() != 4 {
            return Err(Error::InvalidParameter(
                "group_b must hold four connectivity matrices".into(),
            ));
        }
        if let Some(m) = self.mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidParameter(format!("mu entry {m} outside [0,1]")));
        }
        for &q in self.q.iter().chain(std::iter::once(&self.q0)) {
            if !(q > 0.5 && q <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge-preserving probability {q} outside (0.5, 1]"
                )));
            }
        }
        matrix_from_rows(&self.b0, self.k)?;
        for b in &self.group_b {
            matrix_from_rows(b, self.k)?;
        }
        Ok(())
    }

    /// Group (0..4) of source `l` (1-based) under the bracket rule
    /// `{1..⌊L/4⌋}, {⌊L/4⌋+1..⌊L/2⌋}, {⌊L/2⌋+1..⌊3L/4⌋}, {⌊3L/4⌋+1..L}`.
    pub fn group_of(&self, l: usize) -> usize {
        group_of(self.l, l)
    }

    pub fn group_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for l in 1..=self.l {
            sizes[self.group_of(l)] += 1;
        }
        sizes
    }
}

pub(crate) fn group_of(total: usize, l: usize) -> usize {
    if l <= total / 4 {
        0
    } else if l <= total / 2 {
        1
    } else if l <= 3 * total / 4 {
        2
    } else {
        3
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension(format!("expected a {k}x{k} matrix")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// One layer: its generating model, the (unperturbed) network drawn from it,
/// and the privacy level its owner will apply before release.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: SbmSpec,
    pub network: BinaryNetwork,
    pub params: PrivacyParams,
}

/// Target layer plus `L` source layers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub target: Layer,
    pub sources: Vec<Layer>,
}

/// A randomized-response release of one layer: what the analyst observes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleasedLayer {
    pub network: BinaryNetwork,
    pub params: PrivacyParams,
}

/// Released target and sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub target: ReleasedLayer,
    pub sources: Vec<ReleasedLayer>,
}

impl Release {
    pub fn n(&self) -> usize {
        self.target.network.n()
    }

    pub fn without_sources(&self) -> Self {
        Self {
            target: self.target.clone(),
            sources: Vec::new(),
        }
    }
}

/// Build the target and source layers of an experiment.
///
/// The target uses `b0` with balanced contiguous communities. Source `l`
/// takes its group's connectivity, privacy level and perturbed membership;
/// all sources of a group share one relabelled membership, while every
/// network draw has its own stream.
pub fn build_scenario(config: &ExperimentConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let theta0 = Membership::balanced(config.n, config.k)?;
    let b0 = matrix_from_rows(&config.b0, config.k)?;
    let target_spec = SbmSpec::new(theta0.clone(), b0, 0)?;
    let target = Layer {
        network: generate_sbm(&target_spec, derive_seed(seed, &[0, 0])),
        spec: target_spec,
        params: PrivacyParams::symmetric(config.q0)?,
    };

    let mut group_theta = Vec::with_capacity(4);
    for g in 0..4 {
        group_theta.push(perturb_membership(
            &theta0,
            config.mu[g],
            derive_seed(seed, &[1, g as u64]),
        )?);
    }

    let mut sources = Vec::with_capacity(config.l);
    for l in 1..=config.l {
        let g = config.group_of(l);
        let spec = SbmSpec::new(
            group_theta[g].clone(),
            matrix_from_rows(&config.group_b[g], config.k)?,
            l,
        )?;
        sources.push(Layer {
            network: generate_sbm(&spec, derive_seed(seed, &[0, l as u64])),
            spec,
            params: PrivacyParams::symmetric(config.q[g])?,
        });
    }
    Ok(Scenario { target, sources })
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.target.network.n()
    }

    pub fn k(&self) -> usize {
        self.target.spec.k()
    }

    /// Apply each layer's randomized response with an independent stream.
    pub fn release(&self, seed: u64) -> Release {
        let rr = |layer: &Layer, l: usize| ReleasedLayer {
            network: randomized_response(&layer.network, layer.params, derive_seed(seed, &[2, l as u64])),
            params: layer.params,
        };
        Release {
            target: rr(&self.target, 0),
            sources: self.sources.iter().enumerate().map(|(i, s)| rr(s, i + 1)).collect(),
        }
    }

    /// Write the unperturbed layers, target labels and metadata to `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        let layers: Vec<(&BinaryNetwork, PrivacyParams)> = std::iter::once(&self.target)
            .chain(&self.sources)
            .map(|l| (&l.network, l.params))
            .collect();
        io::export_layers(dir, &layers, self.target.spec.theta().labels(), self.k())
    }
}
