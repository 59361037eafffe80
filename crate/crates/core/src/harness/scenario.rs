use rand::Rng;

use super::config::{BandwidthSpec, DatasetSpec, ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::fl::{partition_noniid, ModelSpec, SyntheticSpec, DEFAULT_BYTES_PER_ELEMENT};
use crate::net::{build_and_select_topology, AccessPoint, BandwidthMode, LanDomainNet, Member};
use crate::orchestrator::{DeviceProfile, Workload, World};
use crate::seed::{derive_rng, Stream};

/// The model a config trains, if any.
pub fn model_spec(cfg: &RunConfig) -> Option<ModelSpec> {
    match cfg.dataset {
        DatasetSpec::Synthetic {
            n_features, n_classes, ..
        } => Some(match cfg.model {
            ModelKind::Logistic => ModelSpec::Logistic {
                features: n_features,
                classes: n_classes,
            },
            ModelKind::Mlp { hidden } => ModelSpec::Mlp {
                features: n_features,
                hidden,
                classes: n_classes,
            },
        }),
        DatasetSpec::AccountingOnly => None,
    }
}

/// Build the simulated population described by `cfg`.
///
/// LAN `l` holds devices `l*NC .. (l+1)*NC`; devices are spread over the
/// LAN's APs round-robin. Training data is generated once, split across all
/// devices with label skew, and each device's slice is split 80/20 into
/// train and test.
pub fn build_world(cfg: &RunConfig) -> Result<World> {
    cfg.validate()?;
    let w = &cfg.world;
    let n = w.lans * w.devices_per_lan;
    let spec = model_spec(cfg);

    let model_bytes = cfg
        .model_bytes_override()
        .or(spec.map(|s| s.param_count() as u64 * DEFAULT_BYTES_PER_ELEMENT))
        .ok_or_else(|| Error::field("model_bytes", "required without a trained model"))?;

    let (workload, sample_counts) = match (&cfg.dataset, spec) {
        (
            DatasetSpec::Synthetic {
                n_features,
                n_classes,
                class_sep,
                noise_std,
                samples_per_device,
                shards_per_device,
                min_feature_scale,
            },
            Some(spec),
        ) => {
            let data = SyntheticSpec {
                n_features: *n_features,
                n_classes: *n_classes,
                class_sep: *class_sep,
                noise_std: *noise_std,
                min_feature_scale: *min_feature_scale,
            }
            .generate(n * samples_per_device, cfg.seed)?;
            let shards = partition_noniid(&data, n, *shards_per_device, cfg.seed)?;
            let (train_shards, test_shards): (Vec<_>, Vec<_>) =
                shards.iter().map(|s| s.split_train_test(cfg.seed)).unzip();
            let counts = train_shards.iter().map(|s| s.len()).collect();
            let initial = spec.init(cfg.seed).with_byte_size(model_bytes);
            (
                Workload::Train {
                    spec,
                    initial,
                    train_shards,
                    test_shards,
                },
                counts,
            )
        }
        _ => (Workload::AccountingOnly, vec![1; n]),
    };

    let mut rng = derive_rng(cfg.seed, Stream::World, &[]);
    let devices: Vec<DeviceProfile> = (0..n)
        .map(|d| {
            let jitter = if w.epoch_time_jitter > 0.0 {
                rng.random_range(-w.epoch_time_jitter..=w.epoch_time_jitter)
            } else {
                0.0
            };
            DeviceProfile {
                device_id: d,
                lan_id: d / w.devices_per_lan,
                ap_id: (d % w.devices_per_lan) % w.aps_per_lan,
                sample_count: sample_counts[d],
                epoch_compute_time: w.epoch_compute_time_s * (1.0 + jitter),
            }
        })
        .collect();

    let nets = (0..w.lans)
        .map(|l| lan_net(cfg, l, &devices, model_bytes))
        .collect::<Result<Vec<_>>>()?;
    World::new(devices, nets, model_bytes, workload)
}

fn per_lan(v: &[f64], l: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[l]
    }
}

fn lan_net(cfg: &RunConfig, l: usize, devices: &[DeviceProfile], model_bytes: u64) -> Result<LanDomainNet> {
    let w = &cfg.world;
    let aps = |capacity: f64| -> Vec<AccessPoint> {
        (0..w.aps_per_lan)
            .map(|ap_id| AccessPoint {
                ap_id,
                capacity_mbps: capacity,
            })
            .collect()
    };
    Ok(match &w.bandwidth {
        BandwidthSpec::Fixed { mbps } => {
            let bl = per_lan(mbps, l);
            LanDomainNet {
                lan_id: l,
                aps: aps(bl),
                mode: BandwidthMode::FixedBl { bl_mbps: bl },
            }
        }
        BandwidthSpec::Capacity {
            ap_capacity_mbps,
            backbone_mbps,
        } => LanDomainNet {
            lan_id: l,
            aps: aps(*ap_capacity_mbps),
            mode: BandwidthMode::CapacityModel {
                backbone_mbps: *backbone_mbps,
            },
        },
        BandwidthSpec::Calibrated { mbps } => {
            // Throughput is linear in AP capacity without a backbone, so probe
            // with unit capacity and rescale.
            let mut net = LanDomainNet {
                lan_id: l,
                aps: aps(1.0),
                mode: BandwidthMode::CapacityModel { backbone_mbps: None },
            };
            let members: Vec<Member> = devices
                .iter()
                .filter(|d| d.lan_id == l)
                .take(cfg.params.nc_s)
                .map(|d| Member {
                    device_id: d.device_id,
                    ap_id: d.ap_id,
                })
                .collect();
            let unit_bl = build_and_select_topology(&net, &members, model_bytes)?.bl_mbps;
            let capacity = per_lan(mbps, l) / unit_bl;
            net.aps = aps(capacity);
            net
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(bandwidth: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
                "protocol": "lanfl",
                "world": {{"lans": 3, "devices_per_lan": 4, "aps_per_lan": 2, "bandwidth": {bandwidth}}},
                "dataset": {{"kind": "synthetic", "n_features": 3, "n_classes": 3, "class_sep": 2.0,
                             "noise_std": 1.0, "samples_per_device": 10}},
                "params": {{"cloud_rounds": 1, "nl_s": 2, "nc_s": 4}}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn layout() {
        let world = build_world(&cfg(r#"{"mode": "fixed", "mbps": [10]}"#)).unwrap();
        assert_eq!(world.devices.len(), 12);
        assert_eq!(world.lans[1].devices, vec![4, 5, 6, 7]);
        let aps: Vec<usize> = world.devices[4..8].iter().map(|d| d.ap_id).collect();
        assert_eq!(aps, vec![0, 1, 0, 1]);
        assert_eq!(world.model_bytes, 12 * 4);
        assert!(world.devices.iter().all(|d| d.sample_count == 8));
    }

    #[test]
    fn calibrated_hits_target() {
        let world = build_world(&cfg(r#"{"mode": "calibrated", "mbps": [5, 20, 40]}"#)).unwrap();
        for (lan, want) in world.lans.iter().zip([5.0, 20.0, 40.0]) {
            let members: Vec<Member> = lan.devices.iter().map(|&d| world.member(d)).collect();
            let t = build_and_select_topology(&lan.net, &members, world.model_bytes).unwrap();
            assert!((t.bl_mbps - want).abs() < 1e-9, "{} vs {want}", t.bl_mbps);
        }
    }

    #[test]
    fn deterministic() {
        let c = cfg(r#"{"mode": "capacity", "ap_capacity_mbps": 100}"#);
        let a = build_world(&c).unwrap();
        let b = build_world(&c).unwrap();
        assert_eq!(a.devices, b.devices);
        assert_eq!(a.initial_weights(), b.initial_weights());
    }
}
