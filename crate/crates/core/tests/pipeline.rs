use pfedlia::clustering::{adjusted_rand_index, ClusterAssignment};
use pfedlia::config::ExperimentConfig;
use pfedlia::data::{generate_synthetic, partition, PartitionSpec, SyntheticSpec};
use pfedlia::orchestrator::{run_experiment, sample_clients, Phase};
use pfedlia::report::rounds_csv;
use proptest::prelude::*;

fn small(method: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "method": "{method}",
            "num_clients": 12,
            "participation_fraction": 0.5,
            "total_rounds": 6,
            "warmup_rounds": 2,
            "model": {{"kind": "softmax-regression", "input_dim": 4, "num_classes": 6}},
            "partition": {{"scheme": "pathological", "num_clusters": 3}},
            "data": {{"synthetic": {{"examples_per_class": 40}}}}
        }}"#
    ))
    .unwrap()
}

#[test]
fn same_seed_same_logs() {
    for method in ["fedavg", "local_only", "oracle", "pfedlia_central", "pfedlia_p2p"] {
        let cfg = small(method);
        let a = run_experiment(&cfg, 4).unwrap();
        let b = run_experiment(&cfg, 4).unwrap();
        assert_eq!(rounds_csv(&[(4, a.logs)]), rounds_csv(&[(4, b.logs)]), "{method}");
    }
    let cfg = small("fedavg");
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 2).unwrap();
    assert_ne!(a.logs, b.logs);
}

#[test]
fn rounds_follow_the_schedule() {
    let run = run_experiment(&small("oracle"), 0).unwrap();
    for log in &run.logs {
        assert_eq!(log.phase, Phase::of_round(log.round, 2));
        assert_eq!(log.per_client_accuracy.len(), 12);
        let groups = if log.round <= 2 { 1 } else { 3 };
        assert_eq!(log.per_cluster_sizes.len(), groups, "round {}", log.round);
        assert_eq!(log.per_cluster_sizes.iter().sum::<usize>(), 12);
    }
    assert_eq!(run.influence_builds, 0);

    let pfl = run_experiment(&small("pfedlia_central"), 0).unwrap();
    assert_eq!(pfl.influence_builds, 1);
    assert_eq!(pfl.influence.unwrap().n(), 12);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn partitions_keep_every_example(
        clusters in 1usize..4,
        per_cluster in 1usize..5,
        noisy in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let data = generate_synthetic(&SyntheticSpec {
            num_classes: 2 * clusters,
            input_dim: 3,
            examples_per_class: 30,
            class_separation: 5.0,
            noise_sigma: 1.0,
            seed,
        }).unwrap();
        let clients = clusters * per_cluster;
        // extra labels have to come from another cluster
        let noisy = noisy && clusters > 1;
        let spec = if noisy {
            PartitionSpec::noisy(clusters, clients, seed)
        } else {
            PartitionSpec::pathological(clusters, clients, seed)
        };
        let parts = partition(&data, &spec).unwrap();
        prop_assert_eq!(parts.shards.len(), clients);
        let held: usize = parts.shards.iter().map(|s| s.train.len() + s.validation.len()).sum();
        prop_assert!(held <= data.len());
        if !noisy {
            prop_assert_eq!(held, data.len());
        }
        for s in &parts.shards {
            prop_assert_eq!(s.true_cluster, s.client_id % clusters);
            prop_assert!(!s.validation.is_empty());
        }
    }

    #[test]
    fn ari_ignores_label_names(labels in prop::collection::vec(0usize..4, 2..30), shift in 1usize..10) {
        let a = ClusterAssignment::from_clusters(&labels);
        let renamed: Vec<usize> = labels.iter().map(|l| (l + shift) * 7).collect();
        let b = ClusterAssignment::from_clusters(&renamed);
        let ari = adjusted_rand_index(&a, &b).unwrap();
        prop_assert!((ari - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_is_symmetric(
        pair in (2usize..30).prop_flat_map(|n| (
            prop::collection::vec(0usize..4, n),
            prop::collection::vec(0usize..4, n),
        )),
    ) {
        let a = ClusterAssignment::from_clusters(&pair.0);
        let b = ClusterAssignment::from_clusters(&pair.1);
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ba = adjusted_rand_index(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn sampled_clients_come_from_the_pool(
        pool in prop::collection::btree_set(0usize..200, 1..50),
        fraction in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let pool: Vec<usize> = pool.into_iter().collect();
        let picked = sample_clients(&pool, fraction, seed);
        prop_assert!(!picked.is_empty());
        prop_assert!(picked.len() <= pool.len());
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(picked.iter().all(|c| pool.contains(c)));
        prop_assert_eq!(&picked, &sample_clients(&pool, fraction, seed));
    }
}
