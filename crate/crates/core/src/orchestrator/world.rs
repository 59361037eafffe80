use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::{DatasetShard, ModelSpec, ModelWeights, TrainConfig};
use crate::net::{LanDomainNet, Member};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: usize,
    pub lan_id: usize,
    pub ap_id: usize,
    /// Training samples held by the device.
    pub sample_count: usize,
    /// Seconds per local epoch.
    pub epoch_compute_time: f64,
}

/// A LAN domain: its device group (ids, ascending) and network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanDomain {
    pub net: LanDomainNet,
    pub devices: Vec<usize>,
    pub sample_total: u64,
}

impl LanDomain {
    pub fn lan_id(&self) -> usize {
        self.net.lan_id
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }
}

/// What devices actually compute.
#[derive(Debug, Clone)]
pub enum Workload {
    /// Real local training and evaluation. Shards are indexed by device id.
    Train {
        spec: ModelSpec,
        initial: ModelWeights,
        train_shards: Vec<DatasetShard>,
        test_shards: Vec<DatasetShard>,
    },
    /// Training is a zero-cost no-op; only time and traffic are accounted.
    AccountingOnly,
}

/// Everything a protocol run needs to know about the population.
#[derive(Debug, Clone)]
pub struct World {
    pub devices: Vec<DeviceProfile>,
    pub lans: Vec<LanDomain>,
    /// Wire size of the model, `|w|`.
    pub model_bytes: u64,
    pub workload: Workload,
}

impl World {
    /// Assemble a world from devices and LAN networks, deriving each LAN's
    /// device group and sample total.
    pub fn new(
        devices: Vec<DeviceProfile>,
        nets: Vec<LanDomainNet>,
        model_bytes: u64,
        workload: Workload,
    ) -> Result<Self> {
        let lans = nets
            .into_iter()
            .map(|net| {
                let members: Vec<&DeviceProfile> = devices.iter().filter(|d| d.lan_id == net.lan_id).collect();
                LanDomain {
                    devices: members.iter().map(|d| d.device_id).collect(),
                    sample_total: members.iter().map(|d| d.sample_count as u64).sum(),
                    net,
                }
            })
            .collect();
        let world = World {
            devices,
            lans,
            model_bytes,
            workload,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::invalid("world has no devices"));
        }
        if self.lans.is_empty() {
            return Err(Error::invalid("world has no LAN domains"));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if d.device_id != i {
                return Err(Error::invalid(format!("device ids must be 0..N in order; slot {i} holds {}", d.device_id)));
            }
            if d.sample_count == 0 {
                return Err(Error::invalid(format!("device {i} has no samples")));
            }
            if !(d.epoch_compute_time >= 0.0 && d.epoch_compute_time.is_finite()) {
                return Err(Error::invalid(format!("device {i} has invalid epoch compute time")));
            }
            let lan = self
                .lans
                .iter()
                .find(|l| l.lan_id() == d.lan_id)
                .ok_or_else(|| Error::invalid(format!("device {i} belongs to unknown LAN {}", d.lan_id)))?;
            if !lan.net.has_ap(d.ap_id) {
                return Err(Error::UnknownAccessPoint {
                    lan: d.lan_id,
                    ap: d.ap_id,
                });
            }
        }
        for (i, lan) in self.lans.iter().enumerate() {
            lan.net.validate()?;
            if self.lans[..i].iter().any(|l| l.lan_id() == lan.lan_id()) {
                return Err(Error::invalid(format!("duplicate LAN id {}", lan.lan_id())));
            }
            let expected: Vec<usize> = self
                .devices
                .iter()
                .filter(|d| d.lan_id == lan.lan_id())
                .map(|d| d.device_id)
                .collect();
            if expected != lan.devices {
                return Err(Error::invalid(format!("LAN {} device group disagrees with device list", lan.lan_id())));
            }
            let total: u64 = lan.devices.iter().map(|&d| self.devices[d].sample_count as u64).sum();
            if total != lan.sample_total {
                return Err(Error::invalid(format!("LAN {} sample total is stale", lan.lan_id())));
            }
        }
        if let Workload::Train {
            spec,
            initial,
            train_shards,
            ..
        } = &self.workload
        {
            spec.validate()?;
            if initial.len() != spec.param_count() {
                return Err(Error::DimensionMismatch {
                    expected: spec.param_count(),
                    found: initial.len(),
                });
            }
            if train_shards.len() != self.devices.len() {
                return Err(Error::invalid("one training shard per device required"));
            }
            for (d, shard) in self.devices.iter().zip(train_shards) {
                if shard.owner != d.device_id || shard.len() != d.sample_count {
                    return Err(Error::invalid(format!(
                        "training shard of device {} does not match its profile",
                        d.device_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn initial_weights(&self) -> ModelWeights {
        match &self.workload {
            Workload::Train { initial, .. } => initial.clone().with_byte_size(self.model_bytes),
            Workload::AccountingOnly => ModelWeights::zeros(0).with_byte_size(self.model_bytes),
        }
    }

    pub fn member(&self, device: usize) -> Member {
        Member {
            device_id: device,
            ap_id: self.devices[device].ap_id,
        }
    }

    pub fn min_lan_size(&self) -> usize {
        self.lans.iter().map(|l| l.device_count()).min().unwrap_or(0)
    }
}

/// Which protocol a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Wanfl,
    Lanfl,
}

/// Protocol parameters shared by both engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// RW.
    pub cloud_rounds: usize,
    /// RL.
    #[serde(default = "one")]
    pub device_rounds: usize,
    /// LAN domains selected per cloud round.
    #[serde(default = "default_nl_s")]
    pub nl_s: usize,
    /// Devices selected per LAN per device round.
    #[serde(default = "default_nc_s")]
    pub nc_s: usize,
    /// Devices selected per WAN-FL round.
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    /// WAN bandwidth per device, Mbps.
    #[serde(default = "default_bw")]
    pub bw_mbps: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub heterogeneity_balancing: bool,
    /// End the run at the first converged round.
    #[serde(default)]
    pub stop_on_convergence: bool,
    /// Run seed; carried by the enclosing run config, not serialized here.
    #[serde(skip)]
    pub seed: u64,
    /// Keep the global model after every cloud round in the run output.
    #[serde(skip)]
    pub record_trajectory: bool,
}

fn one() -> usize {
    1
}
pub(crate) fn default_nl_s() -> usize {
    5
}
pub(crate) fn default_nc_s() -> usize {
    10
}
pub(crate) fn default_n_s() -> usize {
    50
}
pub(crate) fn default_bw() -> f64 {
    2.0
}

impl ProtocolConfig {
    pub fn new(cloud_rounds: usize, train: TrainConfig) -> Self {
        ProtocolConfig {
            cloud_rounds,
            device_rounds: 1,
            nl_s: default_nl_s(),
            nc_s: default_nc_s(),
            n_s: default_n_s(),
            bw_mbps: default_bw(),
            train,
            heterogeneity_balancing: false,
            stop_on_convergence: false,
            seed: 0,
            record_trajectory: false,
        }
    }

    pub fn validate_for(&self, world: &World, protocol: Protocol) -> Result<()> {
        self.train.validate()?;
        if self.cloud_rounds == 0 {
            return Err(Error::field("cloud_rounds", "must be >= 1"));
        }
        if !(self.bw_mbps > 0.0 && self.bw_mbps.is_finite()) {
            return Err(Error::field("bw_mbps", "must be a positive rate"));
        }
        match protocol {
            Protocol::Wanfl => {
                if self.n_s == 0 || self.n_s > world.devices.len() {
                    return Err(Error::field(
                        "n_s",
                        format!("must be in 1..={} (device count)", world.devices.len()),
                    ));
                }
            }
            Protocol::Lanfl => {
                if self.device_rounds == 0 {
                    return Err(Error::field("device_rounds", "must be >= 1"));
                }
                if self.nl_s == 0 || self.nl_s > world.lans.len() {
                    return Err(Error::field(
                        "nl_s",
                        format!("must be in 1..={} (LAN count)", world.lans.len()),
                    ));
                }
                if world.min_lan_size() < 2 {
                    return Err(Error::TooFewMembers {
                        needed: 2,
                        got: world.min_lan_size(),
                    });
                }
                if self.nc_s < 2 || self.nc_s > world.min_lan_size() {
                    return Err(Error::field(
                        "nc_s",
                        format!("must be in 2..={} (smallest LAN)", world.min_lan_size()),
                    ));
                }
            }
        }
        Ok(())
    }
}
