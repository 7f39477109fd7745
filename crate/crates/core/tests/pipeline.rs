mod common;

use common::*;
use transnet::federation::{decode, encode};
use transnet::harness::misclassification_rate;
use transnet::netgen::{build_scenario, ExperimentConfig, Release};
use transnet::spectral::{ground_truth_eigenspace, projection_distance, Eigenspace};
use transnet::transnet::{
    baseline_single_sc, compute_summaries, regularization_objective, regularize, run_transnet, select_lambda_cv,
    Coordinator, CvOptions, LambdaChoice, PipelineConfig,
};
use transnet::weighting::WeightingMode;
use transnet::Exec;

fn release(exp: u8, case: u8, l: usize, seed: u64) -> (Release, Eigenspace, Vec<usize>) {
    let config = ExperimentConfig::preset(exp, case).unwrap().with_l(l);
    let scenario = build_scenario(&config, seed).unwrap();
    let truth = ground_truth_eigenspace(&scenario.target.spec).unwrap();
    let labels = scenario.target.spec.theta().labels().to_vec();
    (scenario.release(seed + 1), truth, labels)
}

#[test]
fn regularize_matches_dense_oracle() {
    let mut r = rng(41);
    for trial in 0..20 {
        let (n, k) = (40, 2 + trial % 3);
        let u0 = random_space(n, k, &mut r);
        let ub = Eigenspace::new(gram_schmidt(&(u0.basis() + random_matrix(n, k, &mut r) * 0.3))).unwrap();
        for lambda in [0.0, 0.3, 1.0, 4.0] {
            let got = regularize(&u0, &ub, lambda).unwrap();
            let dense = Eigenspace::new(dense_regularize(u0.basis(), ub.basis(), lambda, k)).unwrap();
            let d = projection_distance(&got, &dense).unwrap();
            assert!(d < 1e-8, "trial {trial} lambda {lambda}: {d}");
        }
    }
}

#[test]
fn regularize_objective_dominates_endpoints() {
    let mut r = rng(42);
    for _ in 0..20 {
        let u0 = random_space(30, 3, &mut r);
        let ub = random_space(30, 3, &mut r);
        for lambda in [0.01, 0.5, 2.0, 20.0] {
            let v = regularize(&u0, &ub, lambda).unwrap();
            let f = regularization_objective(&v, &u0, &ub, lambda);
            assert!(f >= regularization_objective(&u0, &u0, &ub, lambda) - 1e-9);
            assert!(f >= regularization_objective(&ub, &u0, &ub, lambda) - 1e-9);
        }
    }
}

#[test]
fn pipeline_is_bit_deterministic() {
    let (rel, _, _) = release(1, 1, 8, 5);
    let cfg = PipelineConfig::new(3, 11);
    let a = run_transnet(&rel, &cfg).unwrap();
    let b = run_transnet(&rel, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sequential_and_parallel_paths_agree() {
    let (rel, _, _) = release(3, 2, 8, 6);
    let seq = PipelineConfig {
        exec: Exec::Sequential,
        ..PipelineConfig::new(3, 12)
    };
    let par = PipelineConfig {
        exec: Exec::Parallel,
        ..seq.clone()
    };
    assert_eq!(run_transnet(&rel, &seq).unwrap(), run_transnet(&rel, &par).unwrap());
}

#[test]
fn no_sources_reduces_to_single_sc() {
    let (rel, _, _) = release(1, 1, 4, 7);
    let cfg = PipelineConfig::new(3, 13);
    let empty = rel.without_sources();
    let a = run_transnet(&empty, &cfg).unwrap();
    let b = baseline_single_sc(&rel, &cfg).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.regularized_space, b.target_space);
    assert_eq!(a.lambda_selected, 0.0);
    assert!(a.weights.is_none());
}

#[test]
fn coordinator_runs_from_wire_summaries() {
    let (rel, _, _) = release(1, 2, 6, 8);
    let cfg = PipelineConfig::new(3, 14);
    let summaries = compute_summaries(&rel, &cfg).unwrap();
    assert_eq!(summaries.len(), 6);
    let over_wire: Vec<_> = summaries.iter().map(|s| decode(&encode(s)).unwrap()).collect();
    let coord = Coordinator::new(&rel.target, 3, true, cfg.order).unwrap();
    assert_eq!(coord.run(&over_wire, &cfg).unwrap(), run_transnet(&rel, &cfg).unwrap());
}

#[test]
fn transfer_helps_on_informative_sources() {
    // five replications of the easiest case
    let mut better = 0;
    for seed in 0..5 {
        let (rel, truth, labels) = release(1, 1, 16, 100 + seed);
        let mut cfg = PipelineConfig::new(3, seed);
        cfg.lambda = LambdaChoice::Fixed(1.0);
        let t = run_transnet(&rel, &cfg).unwrap();
        let s = baseline_single_sc(&rel, &cfg).unwrap();
        let dt = projection_distance(&t.regularized_space, &truth).unwrap();
        let ds = projection_distance(&s.target_space, &truth).unwrap();
        better += usize::from(dt < ds);
        assert!(misclassification_rate(&t.labels, &labels, 3) <= 0.5);
    }
    assert!(better >= 4, "regularized space closer to truth in only {better}/5 runs");
}

#[test]
fn cv_prefers_transfer_when_sources_are_exact() {
    // sources equal to the truth: CV should not pick λ = 0
    let (rel, truth, _) = release(1, 1, 4, 9);
    let a_hat = transnet::privacy::debias(&rel.target.network, rel.target.params).unwrap();
    let cv = select_lambda_cv(
        a_hat.matrix(),
        &truth,
        3,
        &[0.0, 1.0, 10.0],
        5,
        3,
        &CvOptions::default(),
    )
    .unwrap();
    assert_eq!(cv.scores.len(), 3);
    assert!(cv.scores.iter().all(|s| s.is_finite()));
    assert!(cv.lambda > 0.0, "scores {:?}", cv.scores);
}

#[test]
fn weighting_modes_differ_only_in_weights() {
    let (rel, _, _) = release(1, 1, 8, 10);
    let mut cfg = PipelineConfig::new(3, 15);
    cfg.lambda = LambdaChoice::Fixed(0.5);
    let ada = run_transnet(&rel, &cfg).unwrap();
    cfg.weighting = WeightingMode::Equal;
    let ew = run_transnet(&rel, &cfg).unwrap();
    assert_eq!(ew.weights.unwrap().as_slice(), &[0.125; 8]);
    let w = ada.weights.unwrap();
    // groups 3 and 4 (q = 0.7) weigh less than groups 1 and 2 (q = 0.95)
    assert!(w.as_slice()[0] > w.as_slice()[7]);
}
