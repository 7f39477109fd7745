//! Multi-layer networks read from disk: each layer in turn is the target,
//! every layer is perturbed by randomized response, and clustering accuracy
//! is scored on labeled nodes against a sweep of target privacy levels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::experiment::RunOptions;
use crate::harness::metrics::{mean_se, misclassification_rate, write_records, Method};
use crate::harness::plot::{LineChart, Series};
use crate::io::{ensure_dir, read_edge_list, read_labels};
use crate::netgen::{BinaryNetwork, Release, ReleasedLayer};
use crate::privacy::{randomized_response, PrivacyParams};
use crate::rng::derive_seed;
use crate::transnet::{compute_summaries, Coordinator, PipelineConfig};
use crate::weighting::WeightingMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataset {
    pub layers: Vec<BinaryNetwork>,
    pub names: Vec<String>,
    /// Community per node, remapped to `0..k`; `None` for unlabeled nodes.
    pub labels: Vec<Option<usize>>,
    /// Number of distinct labels.
    pub k: usize,
}

impl RealDataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }
}

/// Load layers over the node set defined by the labels file (one line per
/// node). Raw label values are remapped to `0..k` in ascending order.
pub fn load_multilayer(edge_files: &[PathBuf], labels_file: &Path) -> Result<RealDataset> {
    if edge_files.is_empty() {
        return Err(Error::InvalidParameter("no layer files given".into()));
    }
    let raw = read_labels(labels_file)?;
    let n = raw.len();
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{}: no nodes", labels_file.display())));
    }
    let distinct: BTreeMap<i64, usize> = {
        let mut vals: Vec<i64> = raw.iter().flatten().copied().collect();
        vals.sort_unstable();
        vals.dedup();
        vals.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
    };
    let labels = raw.iter().map(|l| l.map(|v| distinct[&v])).collect();
    let layers = edge_files
        .iter()
        .map(|p| read_edge_list(p, n))
        .collect::<Result<Vec<_>>>()?;
    let names = edge_files
        .iter()
        .map(|p| {
            p.file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
        })
        .collect();
    Ok(RealDataset {
        layers,
        names,
        labels,
        k: distinct.len(),
    })
}

/// Parse `start:stop:step` (inclusive of `stop` up to rounding) or a
/// comma-separated list.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("invalid sweep {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => {
            let (a, b, c): (f64, f64, f64) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                c.trim().parse().map_err(|_| bad())?,
            );
            if !(c > 0.0) || b < a {
                return Err(bad());
            }
            let steps = ((b - a) / c + 1e-9).floor() as usize;
            // round to 12 decimals so 0.7 + 3*0.05 prints as 0.85
            Ok((0..=steps)
                .map(|i| ((a + i as f64 * c) * 1e12).round() / 1e12)
                .collect())
        }
        [_] => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect(),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataRecord {
    pub method: Method,
    pub target: String,
    pub q0: f64,
    pub rep: usize,
    pub seed: u64,
    pub misclass: f64,
    pub lambda: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RealDataOptions {
    /// Layer used as target; `None` targets every layer in turn.
    pub target: Option<usize>,
    pub q0_sweep: Vec<f64>,
    /// Fixed symmetric RR level per layer, applied when the layer is a source.
    pub qs: Vec<f64>,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub run: RunOptions,
}

/// Misclassification restricted to labeled nodes.
pub fn labeled_misclassification(est: &[usize], labels: &[Option<usize>], k: usize) -> f64 {
    let (e, t): (Vec<usize>, Vec<usize>) = est.iter().zip(labels).filter_map(|(&e, t)| t.map(|t| (e, t))).unzip();
    let kk = t.iter().chain(&e).max().map_or(k, |m| k.max(m + 1));
    misclassification_rate(&e, &t, kk)
}

pub fn run_realdata(data: &RealDataset, opts: &RealDataOptions) -> Result<Vec<RealDataRecord>> {
    let n_layers = data.layers.len();
    if n_layers < 2 {
        return Err(Error::InvalidParameter("need at least two layers".into()));
    }
    if opts.qs.len() != n_layers {
        return Err(Error::Dimension(format!(
            "{} privacy levels given for {n_layers} layers",
            opts.qs.len()
        )));
    }
    if data.labeled_count() == 0 {
        return Err(Error::InvalidParameter("no labeled nodes".into()));
    }
    let targets: Vec<usize> = match opts.target {
        Some(t) if t >= n_layers => {
            return Err(Error::InvalidParameter(format!(
                "target {t} out of range for {n_layers} layers"
            )))
        }
        Some(t) => vec![t],
        None => (0..n_layers).collect(),
    };
    let source_params = opts
        .qs
        .iter()
        .map(|&q| PrivacyParams::symmetric(q))
        .collect::<Result<Vec<_>>>()?;
    let q0_params = opts
        .q0_sweep
        .iter()
        .map(|&q| PrivacyParams::symmetric(q))
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for &t in &targets {
        for (qi, &p0) in q0_params.iter().enumerate() {
            for rep in 0..opts.reps {
                jobs.push((t, qi, p0, rep));
            }
        }
    }
    let out: Vec<Result<Vec<RealDataRecord>>> = opts.run.exec.map(jobs, |(t, qi, p0, rep)| {
        let seed = derive_seed(opts.seed, &[t as u64, qi as u64, rep as u64]);
        let release = Release {
            target: ReleasedLayer {
                network: randomized_response(&data.layers[t], p0, derive_seed(seed, &[0])),
                params: p0,
            },
            sources: (0..n_layers)
                .filter(|&l| l != t)
                .map(|l| ReleasedLayer {
                    network: randomized_response(&data.layers[l], source_params[l], derive_seed(seed, &[1, l as u64])),
                    params: source_params[l],
                })
                .collect(),
        };
        evaluate(data, &release, &data.names[t], opts.q0_sweep[qi], rep, seed, opts)
    });
    Ok(out
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

fn evaluate(
    data: &RealDataset,
    release: &Release,
    target: &str,
    q0: f64,
    rep: usize,
    seed: u64,
    opts: &RealDataOptions,
) -> Result<Vec<RealDataRecord>> {
    let base = PipelineConfig {
        exec: Exec::Sequential,
        ..opts
            .run
            .pipeline(opts.k, derive_seed(seed, &[2]), WeightingMode::AdaptivePractical)
    };
    let t = Instant::now();
    let summaries = compute_summaries(release, &base)?;
    let coordinator = Coordinator::new(&release.target, opts.k, opts.run.debias, opts.run.order)?;
    let shared = t.elapsed().as_secs_f64();
    opts.methods
        .iter()
        .map(|&method| {
            let t = Instant::now();
            let res = match method {
                Method::TransNetAdaW => coordinator.run(&summaries, &base)?,
                Method::TransNetEw => coordinator.run(
                    &summaries,
                    &PipelineConfig {
                        weighting: WeightingMode::Equal,
                        ..base.clone()
                    },
                )?,
                Method::DistributedSc => coordinator.distributed_sc(&summaries, &base)?,
                Method::SingleSc => coordinator.single_sc(&base)?,
            };
            let seconds = t.elapsed().as_secs_f64() + shared;
            Ok(RealDataRecord {
                method,
                target: target.to_string(),
                q0,
                rep,
                seed,
                misclass: labeled_misclassification(&res.labels, &data.labels, opts.k),
                lambda: res.lambda_selected.is_finite().then_some(res.lambda_selected),
                seconds: if opts.run.timing { seconds } else { 0.0 },
            })
        })
        .collect()
}

/// `realdata.csv` plus one misclassification-vs-q₀ chart per target layer.
pub fn write_realdata_outputs(records: &[RealDataRecord], out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    write_records(&out_dir.join("realdata.csv"), records)?;
    let mut by_target: BTreeMap<&str, BTreeMap<Method, BTreeMap<u64, Vec<f64>>>> = BTreeMap::new();
    for r in records {
        by_target
            .entry(r.target.as_str())
            .or_default()
            .entry(r.method)
            .or_default()
            .entry(r.q0.to_bits())
            .or_default()
            .push(r.misclass);
    }
    for (target, methods) in by_target {
        let series = methods
            .into_iter()
            .map(|(m, by_q)| {
                let mut points: Vec<(f64, f64)> = by_q
                    .into_iter()
                    .map(|(q, xs)| (f64::from_bits(q), mean_se(&xs).0))
                    .collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series {
                    name: m.name().into(),
                    points,
                }
            })
            .collect();
        LineChart {
            title: format!("target: {target}"),
            x_label: "target privacy level q0".into(),
            y_label: "misclassification rate".into(),
            series,
        }
        .write(&out_dir.join(format!("realdata_{}.svg", sanitize(target))))?;
    }
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        assert_eq!(
            parse_sweep("0.7:0.95:0.05").unwrap(),
            vec![0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
        );
        assert_eq!(parse_sweep("0.8, 0.9").unwrap(), vec![0.8, 0.9]);
        assert!(parse_sweep("0.9:0.7:0.1").is_err());
        assert!(parse_sweep("a:b").is_err());
    }

    #[test]
    fn labeled_only() {
        let labels = [Some(0), Some(0), None, Some(1), Some(1)];
        // the unlabeled node's estimate is ignored
        assert_eq!(labeled_misclassification(&[1, 1, 0, 0, 0], &labels, 2), 0.0);
        assert_eq!(labeled_misclassification(&[1, 0, 0, 0, 0], &labels, 2), 0.25);
    }
}
