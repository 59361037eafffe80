use lanfl::accounting::CostModel;
use lanfl::fl::{local_train, TrainConfig};
use lanfl::harness::{build_world, RunConfig};
use lanfl::net::{comm_time_ps, AccessPoint, BandwidthMode, LanDomainNet, TopologyKind};
use lanfl::orchestrator::{
    balance_device_counts, estimate_device_round, run_lanfl, run_protocol, run_wan_fl, train_seed, DeviceProfile,
    Protocol, Workload, World,
};
use lanfl::seed::rng_from;
use lanfl::Error;
use rand::Rng;

fn config(json: &str) -> RunConfig {
    RunConfig::from_json(json).unwrap()
}

fn small_world(protocol: &str, params: &str) -> RunConfig {
    config(&format!(
        r#"{{
            "protocol": "{protocol}", "seed": 4,
            "world": {{"lans": 4, "devices_per_lan": 5, "aps_per_lan": 2,
                       "bandwidth": {{"mode": "capacity", "ap_capacity_mbps": 100, "backbone_mbps": 60}},
                       "epoch_compute_time_s": 2.0, "epoch_time_jitter": 0.3}},
            "dataset": {{"kind": "synthetic", "n_features": 6, "n_classes": 3, "class_sep": 2.5,
                         "noise_std": 1.0, "samples_per_device": 30}},
            "params": {params}
        }}"#
    ))
}

#[test]
fn single_device_fedavg_is_centralized_sgd() {
    let mut cfg = config(
        r#"{
            "protocol": "wanfl", "seed": 9,
            "world": {"lans": 1, "devices_per_lan": 1},
            "dataset": {"kind": "synthetic", "n_features": 5, "n_classes": 3, "class_sep": 2.0,
                        "noise_std": 1.0, "samples_per_device": 60, "shards_per_device": 1},
            "params": {"cloud_rounds": 6, "n_s": 1, "train": {"local_epochs": 2, "learning_rate": 0.1}}
        }"#,
    );
    cfg.params.record_trajectory = true;
    let world = build_world(&cfg).unwrap();
    let out = run_wan_fl(&world, &cfg.params, &cfg.cost).unwrap();

    let Workload::Train { spec, train_shards, .. } = &world.workload else {
        unreachable!()
    };
    let mut w = world.initial_weights();
    for (k, global) in out.trajectory.iter().enumerate() {
        w = local_train(spec, &w, &train_shards[0], &cfg.params.train, train_seed(cfg.seed, k, 0, 0)).unwrap();
        assert_eq!(global.values, w.values, "round {k}");
    }
}

#[test]
fn lanfl_rejects_zero_device_rounds() {
    let cfg = small_world("lanfl", r#"{"cloud_rounds": 2, "nl_s": 2, "nc_s": 3}"#);
    let world = build_world(&cfg).unwrap();
    let mut params = cfg.params.clone();
    params.device_rounds = 0;
    let err = run_lanfl(&world, &params, &cfg.cost).unwrap_err();
    assert!(matches!(err, Error::ConfigField { ref field, .. } if field == "device_rounds"), "{err}");
    assert!(RunConfig::from_json(&cfg.to_json().unwrap().replace("\"device_rounds\": 1", "\"device_rounds\": 0")).is_err());
}

#[test]
fn lanfl_rejects_oversized_selection() {
    let cfg = small_world("lanfl", r#"{"cloud_rounds": 1, "nl_s": 2, "nc_s": 3}"#);
    let world = build_world(&cfg).unwrap();
    let mut params = cfg.params.clone();
    params.nc_s = 6;
    assert!(run_lanfl(&world, &params, &cfg.cost).is_err());
    params.nc_s = 3;
    params.nl_s = 5;
    assert!(run_lanfl(&world, &params, &cfg.cost).is_err());
}

#[test]
fn two_device_ps_round_costs_training_plus_exchange() {
    let cfg = config(
        r#"{
            "protocol": "lanfl",
            "world": {"lans": 1, "devices_per_lan": 2, "bandwidth": {"mode": "fixed", "mbps": [20]},
                      "epoch_compute_time_s": 3.0},
            "dataset": {"kind": "accounting_only"},
            "model_mib": 25,
            "params": {"cloud_rounds": 1, "nl_s": 1, "nc_s": 2, "device_rounds": 3,
                       "train": {"local_epochs": 4}}
        }"#,
    );
    let world = build_world(&cfg).unwrap();
    let out = run_lanfl(&world, &cfg.params, &cfg.cost).unwrap();
    let lan = &out.rounds[0].lans[0];
    let exchange = comm_time_ps(25 << 20, 20.0).unwrap();
    assert!((exchange - 20.97152).abs() < 1e-9);
    for dr in &lan.device_rounds {
        assert!(matches!(dr.topology, TopologyKind::Ps { aggregator: 0, .. }));
        assert_eq!(dr.train_t, 12.0);
        assert!((dr.com_t_l - exchange).abs() < 1e-12);
    }
    assert!((lan.elapsed_s - 3.0 * (12.0 + exchange)).abs() < 1e-9);
    let m = &out.metrics[0];
    let wan = 2.0 * (25u64 << 20) as f64 * 8.0 / 1e6 / 2.0;
    assert!((m.cumulative_clock_time * 3600.0 - (wan + lan.elapsed_s)).abs() < 1e-6);
}

#[test]
fn accounting_only_runs_have_no_accuracy() {
    let cfg = config(
        r#"{
            "protocol": "wanfl",
            "world": {"lans": 2, "devices_per_lan": 3},
            "dataset": {"kind": "accounting_only"},
            "model_bytes": 1000,
            "params": {"cloud_rounds": 4, "n_s": 5}
        }"#,
    );
    let world = build_world(&cfg).unwrap();
    let out = run_wan_fl(&world, &cfg.params, &cfg.cost).unwrap();
    assert!(out.metrics.iter().all(|m| m.accuracy.is_none()));
    assert!(out.convergence.is_none());
    let bytes = out.metrics[3].cumulative_wan_traffic * (1u64 << 30) as f64;
    assert!((bytes - 4.0 * 5.0 * 1000.0).abs() < 1e-6);
}

#[test]
fn runs_are_deterministic_per_seed() {
    for (proto, params) in [
        ("wanfl", r#"{"cloud_rounds": 5, "n_s": 7}"#),
        ("lanfl", r#"{"cloud_rounds": 5, "nl_s": 2, "nc_s": 3, "device_rounds": 2}"#),
    ] {
        let cfg = small_world(proto, params);
        let run = |c: &RunConfig| {
            let world = build_world(c).unwrap();
            run_protocol(c.protocol, &world, &c.params, &c.cost).unwrap()
        };
        let a = run(&cfg);
        let b = run(&cfg);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.final_weights, b.final_weights);
        assert_eq!(a.rounds, b.rounds);
        let c = run(&cfg.clone().with_seed(5));
        assert_ne!(a.final_weights, c.final_weights);
    }
}

#[test]
fn lanfl_training_improves_accuracy() {
    let cfg = small_world(
        "lanfl",
        r#"{"cloud_rounds": 15, "nl_s": 2, "nc_s": 4, "device_rounds": 2,
            "train": {"local_epochs": 1, "learning_rate": 0.1}}"#,
    );
    let world = build_world(&cfg).unwrap();
    let out = run_lanfl(&world, &cfg.params, &cfg.cost).unwrap();
    let acc: Vec<f64> = out.metrics.iter().map(|m| m.accuracy.unwrap()).collect();
    assert!(acc[14] > 0.8, "{acc:?}");
    // Weights are preserved in logs and match the LAN sample mass.
    for round in &out.rounds {
        for lan in &round.lans {
            let ct = &lan.device_rounds.last().unwrap().ct;
            let mass: usize = ct.iter().map(|&d| world.devices[d].sample_count).sum();
            assert_eq!(lan.weight, mass as f64);
        }
    }
}

fn homogeneous_world(lans: usize, per_lan: usize) -> World {
    let devices = (0..lans * per_lan)
        .map(|d| DeviceProfile {
            device_id: d,
            lan_id: d / per_lan,
            ap_id: 0,
            sample_count: 10,
            epoch_compute_time: 4.0,
        })
        .collect();
    let nets = (0..lans)
        .map(|lan_id| LanDomainNet {
            lan_id,
            aps: vec![AccessPoint {
                ap_id: 0,
                capacity_mbps: 150.0,
            }],
            mode: BandwidthMode::CapacityModel { backbone_mbps: None },
        })
        .collect();
    World::new(devices, nets, 10 << 20, Workload::AccountingOnly).unwrap()
}

#[test]
fn balancer_keeps_base_on_identical_lans() {
    let world = homogeneous_world(5, 12);
    let counts = balance_device_counts(&world, 7, &TrainConfig::default()).unwrap();
    assert_eq!(counts, vec![7; 5]);
}

fn random_world(rng: &mut impl Rng) -> (World, usize) {
    let lans = rng.random_range(2..=6);
    let mut devices = Vec::new();
    let mut nets = Vec::new();
    let mut min_size = usize::MAX;
    for lan_id in 0..lans {
        let size = rng.random_range(3..=14);
        let aps = rng.random_range(1..=3usize).min(size);
        min_size = min_size.min(size);
        let capacity = rng.random_range(5.0..200.0);
        let epoch = rng.random_range(1.0..10.0);
        for i in 0..size {
            devices.push(DeviceProfile {
                device_id: devices.len(),
                lan_id,
                ap_id: i % aps,
                sample_count: rng.random_range(1..100),
                epoch_compute_time: epoch * rng.random_range(0.8..1.2),
            });
        }
        nets.push(LanDomainNet {
            lan_id,
            aps: (0..aps)
                .map(|ap_id| AccessPoint {
                    ap_id,
                    capacity_mbps: capacity,
                })
                .collect(),
            mode: BandwidthMode::CapacityModel {
                backbone_mbps: Some(capacity / 2.0),
            },
        });
    }
    let bytes = rng.random_range(1_000_000..50_000_000);
    let world = World::new(devices, nets, bytes, Workload::AccountingOnly).unwrap();
    let base = rng.random_range(2..=min_size);
    (world, base)
}

fn spread(times: &[f64]) -> f64 {
    let max = times.iter().cloned().fold(f64::MIN, f64::max);
    let min = times.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

#[test]
fn balancing_never_widens_the_pace_spread() {
    let train = TrainConfig {
        local_epochs: 2,
        ..TrainConfig::default()
    };
    let mut rng = rng_from(2024);
    for instance in 0..100 {
        let (world, base) = random_world(&mut rng);
        let counts = balance_device_counts(&world, base, &train).unwrap();
        let t = |lan: usize, n: usize| estimate_device_round(&world, &world.lans[lan], n, &train).unwrap();
        let before: Vec<f64> = (0..world.lans.len()).map(|l| t(l, base)).collect();
        let after: Vec<f64> = counts.iter().enumerate().map(|(l, &n)| t(l, n)).collect();
        assert!(
            spread(&after) <= spread(&before) * (1.0 + 1e-12),
            "instance {instance}: {} > {} (counts {counts:?}, base {base})",
            spread(&after),
            spread(&before)
        );
    }
}

#[test]
fn balanced_run_uses_per_lan_counts() {
    let cfg = config(
        r#"{
            "protocol": "lanfl", "seed": 1,
            "world": {"lans": 3, "devices_per_lan": 12,
                      "bandwidth": {"mode": "calibrated", "mbps": [5, 20, 40]}, "epoch_compute_time_s": 10},
            "dataset": {"kind": "accounting_only"},
            "model_mib": 25,
            "params": {"cloud_rounds": 2, "nl_s": 3, "nc_s": 6, "device_rounds": 2,
                       "heterogeneity_balancing": true}
        }"#,
    );
    let world = build_world(&cfg).unwrap();
    let out = run_protocol(Protocol::Lanfl, &world, &cfg.params, &CostModel::default()).unwrap();
    let counts = out.lan_device_counts.clone().unwrap();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert_eq!(counts[1], 6);
    for round in &out.rounds {
        for lan in &round.lans {
            for dr in &lan.device_rounds {
                assert_eq!(dr.ct.len(), counts[lan.lan_id]);
            }
        }
    }
}
