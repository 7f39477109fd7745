//! The three-step transfer pipeline (weighted eigenspace aggregation, ridge
//! regularization toward the aggregate, k-means) and its two baselines.
//!
//! Sources only ever reach the [`Coordinator`] as [`SourceSummary`] values;
//! the coordinator itself holds the target network.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::federation::{local_site_compute, SourceSummary};
use crate::kmeans::{kmeans, KMeansConfig, KMeansResult};
use crate::netgen::{Release, ReleasedLayer};
use crate::privacy::{prepare, DebiasedNetwork};
use crate::rng::{derive_seed, stream_rng};
use crate::spectral::{procrustes_align, top_k_eigvecs, weighted_aggregate, EigenOrder, Eigenspace, Rotation};
use crate::weighting::{
    adaptive_weights_practical, adaptive_weights_theoretical, density_of_matrix, equal_weights, estimate_heterogeneity,
    DensityEstimate, SourceStats, WeightVector, WeightingMode,
};

pub const DEFAULT_LAMBDA_GRID: [f64; 8] = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const DEFAULT_FOLDS: usize = 5;

// seed-derivation tags
const TAG_KMEANS: u64 = 3;
const TAG_CV: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    Cv { grid: Vec<f64>, folds: usize },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Cv {
            grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub weighting: WeightingMode,
    pub lambda: LambdaChoice,
    /// `false` runs the ablation that skips bias adjustment.
    pub debias: bool,
    pub kmeans: KMeansConfig,
    pub order: EigenOrder,
    pub seed: u64,
    pub exec: Exec,
}

impl PipelineConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            weighting: WeightingMode::default(),
            lambda: LambdaChoice::default(),
            debias: true,
            kmeans: KMeansConfig::default(),
            order: EigenOrder::default(),
            seed,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("k must be >= 2, got {}", self.k)));
        }
        match &self.lambda {
            LambdaChoice::Fixed(l) if !(*l >= 0.0) => {
                Err(Error::InvalidParameter(format!("lambda must be >= 0, got {l}")))
            }
            LambdaChoice::Cv { grid, folds } => {
                if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0)) {
                    Err(Error::InvalidParameter("lambda grid must be nonempty and >= 0".into()))
                } else if *folds < 2 {
                    Err(Error::InvalidParameter("need at least 2 folds".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn kmeans_seed(&self) -> u64 {
        derive_seed(self.seed, &[TAG_KMEANS])
    }
}

/// Per-run records kept alongside the result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub target_density: Option<DensityEstimate>,
    pub target_eigen_degenerate: bool,
    pub source_stats: Vec<SourceStats>,
    /// `(λ, mean held-out loss)` for every grid point.
    pub cv_scores: Vec<(f64, f64)>,
    pub kmeans_wcss: f64,
    pub kmeans_degenerate: bool,
}

impl Diagnostics {
    pub fn render(&self) -> String {
        let mut s = String::new();
        if let Some(d) = self.target_density {
            let _ = writeln!(
                s,
                "target density: {:.6} (raw {:.6}, clamped {})",
                d.value, d.raw, d.clamped
            );
        }
        let _ = writeln!(s, "target eigen-gap degenerate: {}", self.target_eigen_degenerate);
        for st in &self.source_stats {
            let _ = writeln!(
                s,
                "source {}: rho_hat={:.6} e_theta_hat={:.6} q={} q'={}",
                st.l,
                st.rho_hat,
                st.e_theta_hat,
                st.params.q(),
                st.params.q_prime()
            );
        }
        for (l, score) in &self.cv_scores {
            let _ = writeln!(s, "cv lambda={l} loss={score:.6}");
        }
        let _ = writeln!(
            s,
            "kmeans wcss={:.6} degenerate={}",
            self.kmeans_wcss, self.kmeans_degenerate
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub regularized_space: Eigenspace,
    /// `None` when there are no sources.
    pub aggregated_space: Option<Eigenspace>,
    pub target_space: Eigenspace,
    pub labels: Vec<usize>,
    pub weights: Option<WeightVector>,
    pub lambda_selected: f64,
    pub diagnostics: Diagnostics,
}

/// Output of the aggregation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub space: Eigenspace,
    pub weights: WeightVector,
    pub rotations: Vec<Rotation>,
    pub stats: Vec<SourceStats>,
}

/// Align every source eigenspace to the target, weight, sum, and
/// orthonormalize.
pub fn step1_aggregate(
    summaries: &[SourceSummary],
    target_space: &Eigenspace,
    target_density: f64,
    mode: WeightingMode,
) -> Result<Aggregate> {
    if summaries.is_empty() {
        return Err(Error::InvalidParameter("no source summaries".into()));
    }
    let mut rotations = Vec::with_capacity(summaries.len());
    let mut stats = Vec::with_capacity(summaries.len());
    for s in summaries {
        if s.n() != target_space.n() || s.k() != target_space.k() {
            return Err(Error::Dimension(format!(
                "source {} summary is {}x{}, target eigenspace is {}x{}",
                s.l,
                s.n(),
                s.k(),
                target_space.n(),
                target_space.k()
            )));
        }
        rotations.push(procrustes_align(&s.eigenspace, target_space)?);
        stats.push(SourceStats {
            rho_hat: s.rho_hat,
            e_theta_hat: estimate_heterogeneity(&s.eigenspace, target_space)?,
            params: s.params,
            n: s.n(),
            l: s.l,
        });
    }
    let weights = match mode {
        WeightingMode::Equal => equal_weights(summaries.len())?,
        WeightingMode::AdaptivePractical => adaptive_weights_practical(&stats)?,
        WeightingMode::AdaptiveTheoretical => adaptive_weights_theoretical(&stats, target_density)?,
    };
    let spaces: Vec<Eigenspace> = summaries.iter().map(|s| s.eigenspace.clone()).collect();
    let space = weighted_aggregate(&spaces, &rotations, weights.as_slice())?;
    Ok(Aggregate {
        space,
        weights,
        rotations,
        stats,
    })
}

/// Leading `k` eigenvectors of `U₀U₀ᵀ + λ ŪŪᵀ`, the maximizer of
/// `tr(VᵀU₀U₀ᵀV) - (λ/2)‖VVᵀ - ŪŪᵀ‖²_F` over orthonormal `V`.
///
/// Solved inside the joint column span of `[U₀ Ū]`, so the cost is
/// `O(n k²)`.
pub fn regularize(target_space: &Eigenspace, aggregated_space: &Eigenspace, lambda: f64) -> Result<Eigenspace> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if target_space.n() != aggregated_space.n() || target_space.k() != aggregated_space.k() {
        return Err(Error::Dimension(
            "target and aggregated eigenspaces differ in shape".into(),
        ));
    }
    let (n, k) = (target_space.n(), target_space.k());
    let u0 = target_space.basis();
    let ub = aggregated_space.basis();

    let mut joint = DMatrix::zeros(n, 2 * k);
    joint.columns_mut(0, k).copy_from(u0);
    joint.columns_mut(k, k).copy_from(ub);
    let svd = joint.svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let q = u.select_columns(&keep);

    let c = q.transpose() * u0;
    let d = q.transpose() * ub;
    let small = &c * c.transpose() + (&d * d.transpose()) * lambda;
    let small = (&small + small.transpose()) * 0.5;
    let top = top_k_eigvecs(&small, k, EigenOrder::Algebraic)?;
    Ok(Eigenspace::new_unchecked(q * top.space.basis()))
}

/// `tr(VᵀU₀U₀ᵀV) - (λ/2)‖VVᵀ - ŪŪᵀ‖²_F`.
pub fn regularization_objective(
    v: &Eigenspace,
    target_space: &Eigenspace,
    aggregated_space: &Eigenspace,
    lambda: f64,
) -> f64 {
    let fit = (target_space.basis().transpose() * v.basis()).norm_squared();
    let k = v.k() as f64;
    let overlap = (aggregated_space.basis().transpose() * v.basis()).norm_squared();
    let gap = (2.0 * k - 2.0 * overlap).max(0.0);
    fit - 0.5 * lambda * gap
}

pub fn cluster_kmeans(space: &Eigenspace, k: usize, cfg: &KMeansConfig, seed: u64, exec: Exec) -> Result<KMeansResult> {
    let r = kmeans(space.basis(), k, cfg, seed, exec)?;
    if r.degenerate {
        log::warn!("k-means: fewer than {k} distinct embedding rows");
    }
    Ok(r)
}

/// Outcome of [`select_lambda_cv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub lambda: f64,
    /// Mean held-out loss per grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Options for [`select_lambda_cv`] beyond the grid and fold count.
#[derive(Debug, Clone, Copy, Default)]
pub struct CvOptions {
    pub kmeans: KMeansConfig,
    pub order: EigenOrder,
    pub exec: Exec,
}

/// Edge-holdout cross-validation for λ.
///
/// Node pairs are shuffled and dealt into `folds` parts. For each fold the
/// held-in entries of the target matrix are rescaled by `folds/(folds-1)`
/// (held-out entries zeroed), the training eigenspace is regularized toward
/// the aggregate at every λ, nodes are clustered, a block-mean matrix is fit
/// on held-in entries and scored by squared error on the held-out entries.
/// The λ with smallest mean loss wins; ties go to the smaller λ, then to the
/// earlier grid position.
pub fn select_lambda_cv(
    a_hat_0: &DMatrix<f64>,
    aggregated_space: &Eigenspace,
    k: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &CvOptions,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    let n = a_hat_0.nrows();
    if aggregated_space.n() != n || aggregated_space.k() != k {
        return Err(Error::Dimension("aggregated eigenspace does not match target".into()));
    }
    if grid.len() == 1 {
        return Ok(CvOutcome {
            lambda: grid[0],
            scores: vec![f64::NAN],
        });
    }

    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut stream_rng(seed, 0));
    let mut fold_of = vec![0usize; n * n];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        fold_of[i * n + j] = p % folds;
    }

    let per_fold: Vec<Result<Vec<f64>>> = opts.exec.map_range(folds, |f| {
        let scale = folds as f64 / (folds - 1) as f64;
        let mut train = DMatrix::zeros(n, n);
        for &(i, j) in &pairs {
            if fold_of[i * n + j] != f {
                let v = a_hat_0[(i, j)] * scale;
                train[(i, j)] = v;
                train[(j, i)] = v;
            }
        }
        let u_train = top_k_eigvecs(&train, k, opts.order)?.space;
        grid.iter()
            .enumerate()
            .map(|(gi, &lambda)| {
                let v = regularize(&u_train, aggregated_space, lambda)?;
                let km_seed = derive_seed(seed, &[1, f as u64, gi as u64]);
                let labels = kmeans(v.basis(), k, &opts.kmeans, km_seed, Exec::Sequential)?.labels;
                Ok(holdout_loss(a_hat_0, &pairs, &fold_of, f, &labels, k))
            })
            .collect()
    });

    let mut scores = vec![0.0; grid.len()];
    for fold in per_fold {
        for (s, x) in scores.iter_mut().zip(fold?) {
            *s += x / folds as f64;
        }
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if scores[i] < scores[best] || (scores[i] == scores[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    Ok(CvOutcome {
        lambda: grid[best],
        scores,
    })
}

fn holdout_loss(
    a: &DMatrix<f64>,
    pairs: &[(usize, usize)],
    fold_of: &[usize],
    fold: usize,
    labels: &[usize],
    k: usize,
) -> f64 {
    let n = a.nrows();
    let mut sums = vec![0.0; k * k];
    let mut counts = vec![0usize; k * k];
    let mut total = 0.0;
    let mut total_count = 0usize;
    for &(i, j) in pairs {
        if fold_of[i * n + j] != fold {
            let (gi, gj) = (labels[i], labels[j]);
            let (lo, hi) = (gi.min(gj), gi.max(gj));
            sums[lo * k + hi] += a[(i, j)];
            counts[lo * k + hi] += 1;
            total += a[(i, j)];
            total_count += 1;
        }
    }
    let global = if total_count > 0 {
        total / total_count as f64
    } else {
        0.0
    };
    let mut loss = 0.0;
    for &(i, j) in pairs {
        if fold_of[i * n + j] == fold {
            let (gi, gj) = (labels[i], labels[j]);
            let idx = gi.min(gj) * k + gi.max(gj);
            let b = if counts[idx] > 0 {
                sums[idx] / counts[idx] as f64
            } else {
                global
            };
            let r = a[(i, j)] - b;
            loss += r * r;
        }
    }
    loss
}

/// The analyst's side: the prepared target matrix and its eigenspace.
#[derive(Debug, Clone)]
pub struct Coordinator {
    target: DebiasedNetwork,
    target_space: Eigenspace,
    target_density: DensityEstimate,
    target_degenerate: bool,
    k: usize,
    order: EigenOrder,
}

impl Coordinator {
    pub fn new(target: &ReleasedLayer, k: usize, debias: bool, order: EigenOrder) -> Result<Self> {
        Self::from_prepared(prepare(&target.network, target.params, debias)?, k, order)
    }

    pub fn from_prepared(target: DebiasedNetwork, k: usize, order: EigenOrder) -> Result<Self> {
        let top = top_k_eigvecs(target.matrix(), k, order)?;
        let target_density = density_of_matrix(target.matrix());
        Ok(Self {
            target,
            target_space: top.space,
            target_density,
            target_degenerate: top.degenerate,
            k,
            order,
        })
    }

    pub fn target_space(&self) -> &Eigenspace {
        &self.target_space
    }

    pub fn target_density(&self) -> DensityEstimate {
        self.target_density
    }

    pub fn aggregate(&self, summaries: &[SourceSummary], mode: WeightingMode) -> Result<Aggregate> {
        step1_aggregate(summaries, &self.target_space, self.target_density.value, mode)
    }

    fn base_diagnostics(&self) -> Diagnostics {
        Diagnostics {
            target_density: Some(self.target_density),
            target_eigen_degenerate: self.target_degenerate,
            ..Default::default()
        }
    }

    /// Full pipeline given every source's summary (exactly one per source).
    pub fn run(&self, summaries: &[SourceSummary], config: &PipelineConfig) -> Result<PipelineResult> {
        config.validate()?;
        self.check_k(config)?;
        let mut diagnostics = self.base_diagnostics();
        if summaries.is_empty() {
            return self.finish(self.target_space.clone(), None, None, 0.0, diagnostics, config);
        }
        let agg = self.aggregate(summaries, config.weighting)?;
        diagnostics.source_stats = agg.stats.clone();
        let lambda = match &config.lambda {
            LambdaChoice::Fixed(l) => *l,
            LambdaChoice::Cv { grid, folds } => {
                let opts = CvOptions {
                    kmeans: config.kmeans,
                    order: self.order,
                    exec: config.exec,
                };
                let cv = select_lambda_cv(
                    self.target.matrix(),
                    &agg.space,
                    self.k,
                    grid,
                    *folds,
                    derive_seed(config.seed, &[TAG_CV]),
                    &opts,
                )?;
                diagnostics.cv_scores = grid.iter().copied().zip(cv.scores).collect();
                cv.lambda
            }
        };
        let reg = regularize(&self.target_space, &agg.space, lambda)?;
        self.finish(reg, Some(agg.space), Some(agg.weights), lambda, diagnostics, config)
    }

    /// k-means on the equal-weight aggregate; the target only serves as the
    /// alignment reference.
    pub fn distributed_sc(&self, summaries: &[SourceSummary], config: &PipelineConfig) -> Result<PipelineResult> {
        self.check_k(config)?;
        let agg = self.aggregate(summaries, WeightingMode::Equal)?;
        let mut diagnostics = self.base_diagnostics();
        diagnostics.source_stats = agg.stats.clone();
        let space = agg.space.clone();
        self.finish(space, Some(agg.space), Some(agg.weights), f64::NAN, diagnostics, config)
    }

    /// k-means on the target eigenspace alone.
    pub fn single_sc(&self, config: &PipelineConfig) -> Result<PipelineResult> {
        self.check_k(config)?;
        self.finish(
            self.target_space.clone(),
            None,
            None,
            f64::NAN,
            self.base_diagnostics(),
            config,
        )
    }

    fn check_k(&self, config: &PipelineConfig) -> Result<()> {
        if config.k != self.k {
            return Err(Error::Dimension(format!(
                "pipeline k={} but coordinator was built with k={}",
                config.k, self.k
            )));
        }
        Ok(())
    }

    fn finish(
        &self,
        space: Eigenspace,
        aggregated: Option<Eigenspace>,
        weights: Option<WeightVector>,
        lambda: f64,
        mut diagnostics: Diagnostics,
        config: &PipelineConfig,
    ) -> Result<PipelineResult> {
        let km = cluster_kmeans(&space, self.k, &config.kmeans, config.kmeans_seed(), config.exec)?;
        diagnostics.kmeans_wcss = km.wcss;
        diagnostics.kmeans_degenerate = km.degenerate;
        Ok(PipelineResult {
            regularized_space: space,
            aggregated_space: aggregated,
            target_space: self.target_space.clone(),
            labels: km.labels,
            weights,
            lambda_selected: lambda,
            diagnostics,
        })
    }
}

/// Run every source site (in parallel under `exec`), one summary each.
pub fn compute_summaries(release: &Release, config: &PipelineConfig) -> Result<Vec<SourceSummary>> {
    let jobs: Vec<(usize, &ReleasedLayer)> = release.sources.iter().enumerate().collect();
    config
        .exec
        .map(jobs, |(i, s)| {
            local_site_compute(&s.network, s.params, config.k, i + 1, config.debias, config.order)
        })
        .into_iter()
        .collect()
}

pub fn run_transnet(release: &Release, config: &PipelineConfig) -> Result<PipelineResult> {
    let summaries = compute_summaries(release, config)?;
    Coordinator::new(&release.target, config.k, config.debias, config.order)?.run(&summaries, config)
}

pub fn baseline_distributed_sc(release: &Release, config: &PipelineConfig) -> Result<PipelineResult> {
    let summaries = compute_summaries(release, config)?;
    Coordinator::new(&release.target, config.k, config.debias, config.order)?.distributed_sc(&summaries, config)
}

pub fn baseline_single_sc(release: &Release, config: &PipelineConfig) -> Result<PipelineResult> {
    Coordinator::new(&release.target, config.k, config.debias, config.order)?.single_sc(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::projection_distance;

    fn unit_cols(n: usize, cols: &[usize]) -> Eigenspace {
        let mut m = DMatrix::zeros(n, cols.len());
        for (c, &i) in cols.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        Eigenspace::new(m).unwrap()
    }

    fn tilted(n: usize) -> (Eigenspace, Eigenspace) {
        let u0 = unit_cols(n, &[0, 1]);
        let mut m = DMatrix::zeros(n, 2);
        m[(0, 0)] = 0.8;
        m[(2, 0)] = 0.6;
        m[(1, 1)] = 1.0;
        (u0, Eigenspace::new(m).unwrap())
    }

    #[test]
    fn lambda_endpoints() {
        let (u0, ub) = tilted(6);
        let r0 = regularize(&u0, &ub, 0.0).unwrap();
        assert!(projection_distance(&r0, &u0).unwrap() < 1e-12);
        let rinf = regularize(&u0, &ub, 1e9).unwrap();
        assert!(projection_distance(&rinf, &ub).unwrap() < 1e-6);
    }

    #[test]
    fn equal_spaces_fixed_point() {
        let u0 = unit_cols(5, &[1, 3]);
        for lambda in [0.1, 1.0, 10.0] {
            let r = regularize(&u0, &u0, lambda).unwrap();
            assert!(projection_distance(&r, &u0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn objective_beats_endpoints() {
        let (u0, ub) = tilted(6);
        for lambda in [0.3, 1.0, 4.0] {
            let v = regularize(&u0, &ub, lambda).unwrap();
            let f = regularization_objective(&v, &u0, &ub, lambda);
            assert!(f >= regularization_objective(&u0, &u0, &ub, lambda) - 1e-12);
            assert!(f >= regularization_objective(&ub, &u0, &ub, lambda) - 1e-12);
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        let (u0, ub) = tilted(4);
        assert!(regularize(&u0, &ub, -1.0).is_err());
    }

    #[test]
    fn cv_single_and_duplicate_grid() {
        let a = DMatrix::from_fn(20, 20, |i, j| if i != j && (i < 10) == (j < 10) { 1.0 } else { 0.0 });
        let agg = crate::spectral::membership_eigenspace(
            &(0..20).map(|i| usize::from(i >= 10)).collect::<Vec<_>>(),
            &[10, 10],
        );
        let opts = CvOptions::default();
        let one = select_lambda_cv(&a, &agg, 2, &[0.7], 5, 1, &opts).unwrap();
        assert_eq!(one.lambda, 0.7);
        let dup = select_lambda_cv(&a, &agg, 2, &[2.0, 2.0], 5, 1, &opts).unwrap();
        assert_eq!(dup.lambda, 2.0);
        assert_eq!(dup.scores[0], dup.scores[1]);
        assert!(select_lambda_cv(&a, &agg, 2, &[], 5, 1, &opts).is_err());
        assert!(select_lambda_cv(&a, &agg, 2, &[1.0, 2.0], 1, 1, &opts).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::new(3, 0);
        assert!(c.validate().is_ok());
        c.lambda = LambdaChoice::Fixed(-0.5);
        assert!(c.validate().is_err());
        c.lambda = LambdaChoice::Cv { grid: vec![], folds: 5 };
        assert!(c.validate().is_err());
        let c1 = PipelineConfig::new(1, 0);
        assert!(c1.validate().is_err());
    }
}
