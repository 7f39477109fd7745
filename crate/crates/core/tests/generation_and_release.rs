use nalgebra::DMatrix;
use proptest::prelude::*;
use transnet::io::import_layers;
use transnet::netgen::{
    build_scenario, generate_sbm, matrix_from_rows, perturb_membership, BinaryNetwork, ExperimentConfig, Membership,
    SbmSpec,
};
use transnet::privacy::{debias, epsilon_to_q, q_to_epsilon, randomized_response, PrivacyParams};

fn two_block(n: usize, p_in: f64, p_out: f64) -> SbmSpec {
    let b = matrix_from_rows(&[vec![p_in, p_out], vec![p_out, p_in]], 2).unwrap();
    SbmSpec::new(Membership::balanced(n, 2).unwrap(), b, 0).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_networks_are_simple_graphs(n in 2usize..40, p_in in 0.0f64..=1.0, p_out in 0.0f64..=1.0, seed: u64) {
        let net = generate_sbm(&two_block(n, p_in, p_out), seed);
        prop_assert!(net.is_symmetric_zero_diagonal());
        prop_assert_eq!(net, generate_sbm(&two_block(n, p_in, p_out), seed));
    }

    #[test]
    fn rr_output_is_a_simple_graph(n in 2usize..40, q in 0.0f64..=1.0, qp in 0.0f64..=1.0, seed: u64) {
        let net = generate_sbm(&two_block(n, 0.5, 0.1), seed);
        let out = randomized_response(&net, PrivacyParams::new(q, qp).unwrap(), seed ^ 1);
        prop_assert!(out.is_symmetric_zero_diagonal());
    }

    #[test]
    fn perturbation_moves_exact_count_to_other_communities(
        sizes in prop::collection::vec(1usize..30, 2..6),
        mu in 0.0f64..=1.0,
        seed: u64,
    ) {
        let k = sizes.len();
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let theta = Membership::new(labels.clone(), k).unwrap();
        let out = perturb_membership(&theta, mu, seed).unwrap();
        for (c, &s) in sizes.iter().enumerate() {
            let moved = (0..labels.len()).filter(|&i| labels[i] == c && out.labels()[i] != c).count();
            prop_assert_eq!(moved, ((mu * s as f64) + 1e-9).floor() as usize);
        }
    }

    #[test]
    fn epsilon_to_q_is_increasing(a in 0.01f64..20.0, b in 0.01f64..20.0) {
        prop_assume!(a < b);
        prop_assert!(epsilon_to_q(a).unwrap().q() < epsilon_to_q(b).unwrap().q());
        let qa = 0.5 + a / 50.0;
        let qb = 0.5 + b / 50.0;
        prop_assert!(q_to_epsilon(PrivacyParams::symmetric(qa).unwrap()).unwrap()
            < q_to_epsilon(PrivacyParams::symmetric(qb).unwrap()).unwrap());
    }
}

#[test]
fn edge_density_within_three_standard_errors() {
    let spec = two_block(60, 0.3, 0.05);
    let p = spec.population();
    let n = 60;
    let expected: f64 = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| p[(i, j)])
        .sum::<f64>()
        / (n * (n - 1) / 2) as f64;
    let densities: Vec<f64> = (0..200).map(|s| generate_sbm(&spec, s).density()).collect();
    let (m, se) = mean_and_se(&densities);
    assert!(
        (m - expected).abs() < 3.0 * se,
        "mean {m}, expected {expected}, se {se}"
    );
}

#[test]
fn rr_flip_rates_match_parameters() {
    let spec = two_block(80, 0.5, 0.5);
    let net = generate_sbm(&spec, 3);
    let params = PrivacyParams::new(0.8, 0.9).unwrap();
    let (mut kept1, mut tot1, mut kept0, mut tot0) = (0usize, 0usize, 0usize, 0usize);
    for s in 0..50 {
        let out = randomized_response(&net, params, 100 + s);
        for i in 0..80 {
            for j in i + 1..80 {
                if net.has_edge(i, j) {
                    tot1 += 1;
                    kept1 += usize::from(out.has_edge(i, j));
                } else {
                    tot0 += 1;
                    kept0 += usize::from(!out.has_edge(i, j));
                }
            }
        }
    }
    let check = |kept: usize, tot: usize, p: f64| {
        let rate = kept as f64 / tot as f64;
        let se = (p * (1.0 - p) / tot as f64).sqrt();
        assert!((rate - p).abs() < 4.0 * se, "rate {rate}, p {p}");
    };
    check(kept1, tot1, 0.8);
    check(kept0, tot0, 0.9);
}

#[test]
fn debiased_density_tracks_true_density() {
    let spec = two_block(50, 0.4, 0.1);
    let net = generate_sbm(&spec, 5);
    let params = PrivacyParams::symmetric(0.8).unwrap();
    let truth = net.density();
    let ds: Vec<f64> = (0..300)
        .map(|s| {
            let m = debias(&randomized_response(&net, params, s), params)
                .unwrap()
                .into_matrix();
            m.sum() / (50.0 * 49.0)
        })
        .collect();
    let (m, se) = mean_and_se(&ds);
    assert!((m - truth).abs() < 3.0 * se);
}

#[test]
fn debias_rejects_uninformative_parameters() {
    let net = BinaryNetwork::from_edges(3, [(0, 1)]).unwrap();
    for (q, qp) in [(0.5, 0.5), (0.3, 0.6), (0.0, 0.0)] {
        assert!(debias(&net, PrivacyParams::new(q, qp).unwrap()).is_err());
    }
    let m = debias(&net, PrivacyParams::identity()).unwrap().into_matrix();
    assert_eq!(m, net.to_matrix());
}

#[test]
fn density_of_single_edge_file_example() {
    let net = BinaryNetwork::from_edges(3, [(0, 1), (1, 0)]).unwrap();
    assert_eq!(net.edge_count(), 1);
    assert!((net.to_matrix().sum() / 6.0 - 2.0 / 6.0).abs() < 1e-15);
}

#[test]
fn scenario_export_import_is_bit_identical() {
    let config = ExperimentConfig::preset(1, 2).unwrap().with_l(5);
    let scenario = build_scenario(&config, 77).unwrap();
    let dir = tempfile::tempdir().unwrap();
    scenario.export(dir.path()).unwrap();
    let back = import_layers(dir.path()).unwrap();
    assert_eq!(back.k, 3);
    assert_eq!(back.layers.len(), 6);
    assert_eq!(back.layers[0], scenario.target.network);
    for (a, b) in back.layers[1..].iter().zip(&scenario.sources) {
        assert_eq!(a, &b.network);
    }
    for (p, b) in back.params[1..].iter().zip(&scenario.sources) {
        assert_eq!(*p, b.params);
    }
    let labels: Vec<Option<i64>> = scenario
        .target
        .spec
        .theta()
        .labels()
        .iter()
        .map(|&l| Some(l as i64))
        .collect();
    assert_eq!(back.labels, labels);
}

#[test]
fn scenario_is_seed_deterministic_and_layers_differ() {
    let config = ExperimentConfig::preset(3, 1).unwrap().with_l(8);
    let a = build_scenario(&config, 9).unwrap();
    let b = build_scenario(&config, 9).unwrap();
    assert_eq!(a.target.network, b.target.network);
    assert_eq!(a.release(4).sources[3].network, b.release(4).sources[3].network);
    assert_ne!(a.sources[0].network, a.sources[1].network);
    let c = build_scenario(&config, 10).unwrap();
    assert_ne!(a.target.network, c.target.network);
}

#[test]
fn population_matrix_is_theta_b_theta_t() {
    let spec = two_block(6, 0.7, 0.2);
    let theta = spec.theta().to_matrix();
    let expected: DMatrix<f64> = &theta * spec.b() * theta.transpose();
    assert!((spec.population() - expected).norm() < 1e-15);
}
