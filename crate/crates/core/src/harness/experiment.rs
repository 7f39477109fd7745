//! Simulation runner: scenarios over an `L` sweep, replications, all four
//! methods, CSV and SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::metrics::{mean_se, misclassification_rate, write_records, Method, MetricRecord};
use crate::harness::plot::{LineChart, Series};
use crate::io::ensure_dir;
use crate::kmeans::KMeansConfig;
use crate::netgen::{build_scenario, ExperimentConfig, Release, Scenario};
use crate::rng::derive_seed;
use crate::spectral::{ground_truth_eigenspace, projection_distance, EigenOrder, Eigenspace};
use crate::transnet::{compute_summaries, Coordinator, LambdaChoice, PipelineConfig, PipelineResult};
use crate::weighting::WeightingMode;

pub const DEFAULT_L_SWEEP: [usize; 5] = [8, 12, 16, 20, 24];

/// Knobs shared by every replication of a run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub lambda: LambdaChoice,
    pub kmeans: KMeansConfig,
    pub order: EigenOrder,
    pub debias: bool,
    /// Record wall-clock seconds; off keeps `metrics.csv` byte-reproducible.
    pub timing: bool,
    /// Replications run under this strategy; each pipeline runs sequentially
    /// inside its replication.
    pub exec: Exec,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            lambda: LambdaChoice::default(),
            kmeans: KMeansConfig::default(),
            order: EigenOrder::default(),
            debias: true,
            timing: false,
            exec: Exec::default(),
        }
    }
}

impl RunOptions {
    pub fn pipeline(&self, k: usize, seed: u64, weighting: WeightingMode) -> PipelineConfig {
        PipelineConfig {
            k,
            weighting,
            lambda: self.lambda.clone(),
            debias: self.debias,
            kmeans: self.kmeans,
            order: self.order,
            seed,
            exec: Exec::Sequential,
        }
    }
}

/// One replication's inputs, fully determined by `(config, L, seed)`.
#[derive(Debug, Clone)]
pub struct Replication {
    pub scenario: Scenario,
    pub release: Release,
    /// Population eigenspace of the target.
    pub truth: Eigenspace,
    pub seed: u64,
    pub pipeline_seed: u64,
}

impl Replication {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let scenario = build_scenario(config, derive_seed(seed, &[10]))?;
        let release = scenario.release(derive_seed(seed, &[11]));
        let truth = ground_truth_eigenspace(&scenario.target.spec)?;
        Ok(Self {
            scenario,
            release,
            truth,
            seed,
            pipeline_seed: derive_seed(seed, &[12]),
        })
    }

    pub fn truth_labels(&self) -> &[usize] {
        self.scenario.target.spec.theta().labels()
    }
}

/// Seed of replication `rep` at source count `l`.
pub fn replication_seed(master: u64, l: usize, rep: usize) -> u64 {
    derive_seed(master, &[l as u64, rep as u64])
}

/// Everything produced by one `(L, rep)` job.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub l: usize,
    pub rep: usize,
    pub records: Vec<MetricRecord>,
    pub weights: Vec<(Method, Vec<f64>)>,
    pub diagnostics: String,
}

pub fn run_replication(
    config: &ExperimentConfig,
    rep: usize,
    seed: u64,
    methods: &[Method],
    opts: &RunOptions,
) -> Result<ReplicationOutcome> {
    let r = Replication::new(config, seed)?;
    let k = config.k;
    let base = opts.pipeline(k, r.pipeline_seed, WeightingMode::AdaptivePractical);

    let t = Instant::now();
    let needs_sources = methods.iter().any(|m| *m != Method::SingleSc);
    let summaries = if needs_sources {
        compute_summaries(&r.release, &base)?
    } else {
        Vec::new()
    };
    let coordinator = Coordinator::new(&r.release.target, k, opts.debias, opts.order)?;
    let shared = t.elapsed().as_secs_f64();

    let mut records = Vec::with_capacity(methods.len());
    let mut weights = Vec::new();
    let mut diag = String::new();
    for &method in methods {
        let t = Instant::now();
        let (res, space): (PipelineResult, &str) = match method {
            Method::TransNetAdaW => (coordinator.run(&summaries, &base)?, "regularized"),
            Method::TransNetEw => {
                let cfg = PipelineConfig {
                    weighting: WeightingMode::Equal,
                    ..base.clone()
                };
                (coordinator.run(&summaries, &cfg)?, "regularized")
            }
            Method::DistributedSc => (coordinator.distributed_sc(&summaries, &base)?, "aggregated"),
            Method::SingleSc => (coordinator.single_sc(&base)?, "target"),
        };
        let elapsed = t.elapsed().as_secs_f64() + shared;
        let estimate = match space {
            "aggregated" => res.aggregated_space.as_ref().expect("sources present"),
            "target" => &res.target_space,
            _ => &res.regularized_space,
        };
        let proj_dist = projection_distance(estimate, &r.truth)?;
        let misclass = misclassification_rate(&res.labels, r.truth_labels(), k);
        if let Some(w) = &res.weights {
            weights.push((method, w.as_slice().to_vec()));
        }
        let _ = writeln!(diag, "== {} L={} rep={} seed={}", method, config.l, rep, seed);
        diag.push_str(&res.diagnostics.render());
        records.push(MetricRecord {
            method,
            l: config.l,
            case: config.case,
            rep,
            seed,
            proj_dist,
            misclass,
            lambda: res.lambda_selected.is_finite().then_some(res.lambda_selected),
            seconds: if opts.timing { elapsed } else { 0.0 },
        });
    }
    Ok(ReplicationOutcome {
        l: config.l,
        rep,
        records,
        weights,
        diagnostics: diag,
    })
}

/// All replications at every `L` in `sweep`, in `(L, rep)` order.
pub fn run_experiment(
    config: &ExperimentConfig,
    sweep: &[usize],
    methods: &[Method],
    opts: &RunOptions,
) -> Result<Vec<ReplicationOutcome>> {
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods selected".into()));
    }
    let jobs: Vec<(usize, usize)> = sweep
        .iter()
        .flat_map(|&l| (0..config.reps).map(move |rep| (l, rep)))
        .collect();
    opts.exec
        .map(jobs, |(l, rep)| {
            let cfg = config.with_l(l);
            run_replication(&cfg, rep, replication_seed(config.seed, l, rep), methods, opts)
        })
        .into_iter()
        .collect()
}

pub fn records_of(outcomes: &[ReplicationOutcome]) -> Vec<MetricRecord> {
    outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect()
}

/// Mean and standard error per `(method, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    #[serde(rename = "L")]
    pub l: usize,
    pub case: u8,
    pub reps: usize,
    pub proj_dist_mean: f64,
    pub proj_dist_se: f64,
    pub misclass_mean: f64,
    pub misclass_se: f64,
    pub lambda_mean: Option<f64>,
}

pub fn summarize(records: &[MetricRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize, u8), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method, r.l, r.case)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, l, case), rs)| {
            let pd: Vec<f64> = rs.iter().map(|r| r.proj_dist).collect();
            let mc: Vec<f64> = rs.iter().map(|r| r.misclass).collect();
            let lam: Vec<f64> = rs.iter().filter_map(|r| r.lambda).collect();
            let (proj_dist_mean, proj_dist_se) = mean_se(&pd);
            let (misclass_mean, misclass_se) = mean_se(&mc);
            SummaryRow {
                method,
                l,
                case,
                reps: rs.len(),
                proj_dist_mean,
                proj_dist_se,
                misclass_mean,
                misclass_se,
                lambda_mean: (!lam.is_empty()).then(|| mean_se(&lam).0),
            }
        })
        .collect()
}

/// Mean of `metric` for `method` at `l`.
pub fn mean_metric(records: &[MetricRecord], method: Method, l: usize, metric: fn(&MetricRecord) -> f64) -> f64 {
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.l == l)
        .map(metric)
        .collect();
    mean_se(&xs).0
}

/// Line charts of mean projection distance and misclassification against
/// `L`, plus `summary.csv` with the plotted numbers.
pub fn emit_plots(records: &[MetricRecord], experiment: u8, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let rows = summarize(records);
    write_records(&out_dir.join("summary.csv"), &rows)?;
    let cases: Vec<u8> = {
        let mut c: Vec<u8> = rows.iter().map(|r| r.case).collect();
        c.dedup();
        c
    };
    for case in cases {
        for (metric, label, get) in [
            (
                "proj_dist",
                "projection distance",
                (|r: &SummaryRow| r.proj_dist_mean) as fn(&SummaryRow) -> f64,
            ),
            ("misclass", "misclassification rate", |r: &SummaryRow| r.misclass_mean),
        ] {
            let mut series: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.case == case) {
                series.entry(r.method).or_default().push((r.l as f64, get(r)));
            }
            let chart = LineChart {
                title: format!("Experiment {experiment}, case {case}: {label}"),
                x_label: "number of source networks L".into(),
                y_label: label.into(),
                series: series
                    .into_iter()
                    .map(|(m, points)| Series {
                        name: m.name().into(),
                        points,
                    })
                    .collect(),
            };
            chart.write(&out_dir.join(format!("exp{experiment}_case{case}_{metric}.svg")))?;
        }
    }
    Ok(())
}

/// Write `metrics.csv`, `summary.csv`, per-L weight tables, the diagnostics
/// log and the plots.
pub fn write_outputs(outcomes: &[ReplicationOutcome], experiment: u8, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let records = records_of(outcomes);
    write_records(&out_dir.join("metrics.csv"), &records)?;
    write_weights(outcomes, out_dir)?;
    let log_path = out_dir.join("diagnostics.log");
    let log: String = outcomes.iter().map(|o| o.diagnostics.as_str()).collect();
    std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    emit_plots(&records, experiment, out_dir)
}

/// `weights_L<L>.csv`: `method,rep,w1,...,wL`.
fn write_weights(outcomes: &[ReplicationOutcome], out_dir: &Path) -> Result<()> {
    let mut by_l: BTreeMap<usize, Vec<&ReplicationOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_l.entry(o.l).or_default().push(o);
    }
    for (l, os) in by_l {
        let path = out_dir.join(format!("weights_L{l}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let mut header = vec!["method".to_string(), "rep".to_string()];
        header.extend((1..=l).map(|i| format!("w{i}")));
        w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
        for o in os {
            for (m, ws) in &o.weights {
                let mut row = vec![m.name().to_string(), o.rep.to_string()];
                row.extend(ws.iter().map(|x| format!("{x:?}")));
                w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
