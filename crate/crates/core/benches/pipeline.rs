use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transnet::harness::experiment::{run_experiment, RunOptions};
use transnet::harness::metrics::Method;
use transnet::kmeans::{kmeans, KMeansConfig};
use transnet::netgen::{build_scenario, ExperimentConfig};
use transnet::transnet::{compute_summaries, run_transnet, LambdaChoice, PipelineConfig};
use transnet::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pipeline(c: &mut Criterion) {
    let config = ExperimentConfig::preset(1, 1).unwrap().with_l(16);
    let release = build_scenario(&config, 1).unwrap().release(2);

    let mut g = c.benchmark_group("site_summaries");
    for (name, exec) in MODES {
        let cfg = PipelineConfig {
            exec,
            ..PipelineConfig::new(3, 3)
        };
        g.bench_function(name, |b| {
            b.iter(|| compute_summaries(black_box(&release), &cfg).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("transnet_cv");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = PipelineConfig {
            exec,
            ..PipelineConfig::new(3, 3)
        };
        g.bench_function(name, |b| b.iter(|| run_transnet(black_box(&release), &cfg).unwrap()));
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let config = ExperimentConfig::preset(1, 1).unwrap().with_l(4);
    let release = build_scenario(&config, 4).unwrap().release(5);
    let space = run_transnet(&release, &PipelineConfig::new(3, 6))
        .unwrap()
        .regularized_space;
    let mut g = c.benchmark_group("kmeans_restarts");
    for restarts in [10, 40] {
        for (name, exec) in MODES {
            let cfg = KMeansConfig {
                restarts,
                ..Default::default()
            };
            g.bench_with_input(BenchmarkId::new(name, restarts), &cfg, |b, cfg| {
                b.iter(|| kmeans(black_box(space.basis()), 3, cfg, 7, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn replications(c: &mut Criterion) {
    let config = ExperimentConfig {
        reps: 4,
        ..ExperimentConfig::preset(1, 1).unwrap()
    };
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, exec) in MODES {
        let opts = RunOptions {
            lambda: LambdaChoice::Fixed(1.0),
            exec,
            ..Default::default()
        };
        g.bench_function(name, |b| {
            b.iter(|| run_experiment(&config, &[8], &[Method::TransNetAdaW, Method::SingleSc], &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pipeline, clustering, replications);
criterion_main!(benches);
