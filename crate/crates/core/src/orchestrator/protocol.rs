use serde::{Deserialize, Serialize};

use super::balance::balance_device_counts;
use super::select::select_uniform;
use super::world::{Protocol, ProtocolConfig, World, Workload};
use crate::accounting::{converged, Convergence, CostModel, Ledger, RoundMetrics, RoundTiming, Traffic};
use crate::error::{Error, Result};
use crate::fl::{aggregate, evaluate, local_train, ModelWeights};
use crate::net::{build_and_select_topology, ring_allreduce, wan_transfer_time, Member, TopologyKind};
use crate::seed::{derive_seed, Stream};

/// One intra-LAN aggregation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRoundLog {
    /// Selected training devices (CT), ascending ids.
    pub ct: Vec<usize>,
    pub topology: TopologyKind,
    pub bl_mbps: f64,
    pub train_t: f64,
    pub com_t_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanLog {
    pub lan_id: usize,
    pub elapsed_s: f64,
    /// Aggregation weight of the returned LAN model.
    pub weight: f64,
    pub device_rounds: Vec<DeviceRoundLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudRoundLog {
    /// LAN ids chosen this round (LanFL only).
    pub selected_lans: Vec<usize>,
    /// Devices chosen this round (WAN-FL only).
    pub selected_devices: Vec<usize>,
    pub lans: Vec<LanLog>,
}

/// Everything a protocol run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub protocol: Protocol,
    pub metrics: Vec<RoundMetrics>,
    pub rounds: Vec<CloudRoundLog>,
    pub final_weights: ModelWeights,
    /// Global model after each cloud round, if requested.
    pub trajectory: Vec<ModelWeights>,
    pub convergence: Option<Convergence>,
    /// Per-LAN device counts used when balancing is on.
    pub lan_device_counts: Option<Vec<usize>>,
}

/// Seed for the training stream of `device` in cloud round `k`, device round `j`.
pub fn train_seed(run_seed: u64, k: usize, j: usize, device: usize) -> u64 {
    derive_seed(run_seed, Stream::Train, &[k as u64, j as u64, device as u64])
}

/// Seed for selecting devices in LAN `lan_id` (WAN-FL uses LAN 0, round 0).
pub fn device_selection_seed(run_seed: u64, k: usize, j: usize, lan_id: usize) -> u64 {
    derive_seed(run_seed, Stream::SelectDevices, &[k as u64, j as u64, lan_id as u64])
}

pub fn lan_selection_seed(run_seed: u64, k: usize) -> u64 {
    derive_seed(run_seed, Stream::SelectLans, &[k as u64])
}

fn sample_weight(world: &World, device: usize, weighted: bool) -> f64 {
    if weighted {
        world.devices[device].sample_count as f64
    } else {
        1.0
    }
}

fn train_device(world: &World, w: &ModelWeights, device: usize, cfg: &ProtocolConfig, seed: u64) -> Result<ModelWeights> {
    match &world.workload {
        Workload::Train { spec, train_shards, .. } => {
            local_train(spec, w, &train_shards[device], &cfg.train, seed).map(|m| m.with_byte_size(world.model_bytes))
        }
        Workload::AccountingOnly => Ok(w.clone()),
    }
}

fn combine(updates: &[(&ModelWeights, f64)], accounting_only: bool) -> Result<ModelWeights> {
    if accounting_only {
        return Ok(updates[0].0.clone());
    }
    aggregate(updates)
}

fn test_accuracy(world: &World, w: &ModelWeights) -> Result<Option<f64>> {
    match &world.workload {
        Workload::Train { spec, test_shards, .. } => evaluate(spec, w, test_shards).map(Some),
        Workload::AccountingOnly => Ok(None),
    }
}

fn max_epoch_time(world: &World, devices: &[usize]) -> f64 {
    devices
        .iter()
        .map(|&d| world.devices[d].epoch_compute_time)
        .fold(0.0, f64::max)
}

struct Progress {
    ledger: Ledger,
    history_pct: Vec<f64>,
    trajectory: Vec<ModelWeights>,
    convergence: Option<Convergence>,
}

impl Progress {
    fn new(cost: CostModel) -> Self {
        Progress {
            ledger: Ledger::new(cost),
            history_pct: Vec::new(),
            trajectory: Vec::new(),
            convergence: None,
        }
    }

    /// Record a finished cloud round; returns true when the run should stop.
    fn finish_round(
        &mut self,
        world: &World,
        cfg: &ProtocolConfig,
        global: &ModelWeights,
        timing: &RoundTiming,
        down: Traffic,
        up: Traffic,
    ) -> Result<bool> {
        let acc = test_accuracy(world, global)?;
        self.ledger.record(timing, down, up, acc)?;
        if cfg.record_trajectory {
            self.trajectory.push(global.clone());
        }
        if let Some(a) = acc {
            self.history_pct.push(100.0 * a);
            if self.convergence.is_none() {
                self.convergence = converged(&self.history_pct);
            }
        }
        Ok(cfg.stop_on_convergence && self.convergence.is_some())
    }
}

/// WAN-FL / FedAvg: each cloud round, `n_s` uniformly chosen devices download
/// the global model, train `E` epochs and upload; the cloud averages.
pub fn run_wan_fl(world: &World, cfg: &ProtocolConfig, cost: &CostModel) -> Result<RunOutput> {
    world.validate()?;
    cfg.validate_for(world, Protocol::Wanfl)?;
    let accounting_only = matches!(world.workload, Workload::AccountingOnly);
    let all: Vec<usize> = (0..world.devices.len()).collect();
    let per_model = Traffic::from_bytes(world.model_bytes as u128);
    let one_way = wan_transfer_time(world.model_bytes, cfg.bw_mbps)?;

    let mut global = world.initial_weights();
    let mut progress = Progress::new(*cost);
    let mut rounds = Vec::with_capacity(cfg.cloud_rounds);

    for k in 0..cfg.cloud_rounds {
        let selected = select_uniform(&all, cfg.n_s, device_selection_seed(cfg.seed, k, 0, 0))?;
        let trained = selected
            .iter()
            .map(|&d| train_device(world, &global, d, cfg, train_seed(cfg.seed, k, 0, d)))
            .collect::<Result<Vec<_>>>()?;
        let updates: Vec<(&ModelWeights, f64)> = trained
            .iter()
            .zip(&selected)
            .map(|(w, &d)| (w, sample_weight(world, d, cfg.train.weighted_aggregation)))
            .collect();
        global = combine(&updates, accounting_only)?;

        let timing = RoundTiming {
            com_t_w: 2.0 * one_way,
            device_rounds: vec![(cfg.train.local_epochs as f64 * max_epoch_time(world, &selected), 0.0)],
        };
        let moved = Traffic::from_bytes(per_model.bytes * selected.len() as u128);
        rounds.push(CloudRoundLog {
            selected_lans: Vec::new(),
            selected_devices: selected,
            lans: Vec::new(),
        });
        if progress.finish_round(world, cfg, &global, &timing, moved, moved)? {
            break;
        }
    }

    Ok(RunOutput {
        protocol: Protocol::Wanfl,
        metrics: progress.ledger.into_rounds(),
        rounds,
        final_weights: global,
        trajectory: progress.trajectory,
        convergence: progress.convergence,
        lan_device_counts: None,
    })
}

/// Result of one LAN's share of a cloud round.
#[derive(Debug, Clone)]
pub struct LanOutcome {
    pub model: ModelWeights,
    pub log: LanLog,
}

/// Run `RL` device rounds inside one LAN starting from `global`.
///
/// Each device round draws `nc` devices, picks the fastest topology for them,
/// trains every device for `E` epochs from the current LAN model and
/// aggregates on the topology (aggregator average for PS, all-reduce for
/// Ring). Elapsed time per device round is the slowest device's training time
/// plus the topology's communication time.
pub fn lan_orchestrate(
    world: &World,
    lan_index: usize,
    global: &ModelWeights,
    cfg: &ProtocolConfig,
    cloud_round: usize,
    nc: usize,
) -> Result<LanOutcome> {
    let lan = &world.lans[lan_index];
    if lan.device_count() < 2 {
        return Err(Error::TooFewMembers {
            needed: 2,
            got: lan.device_count(),
        });
    }
    let accounting_only = matches!(world.workload, Workload::AccountingOnly);
    let weighted = cfg.train.weighted_aggregation;
    let mut model = global.clone();
    let mut elapsed = 0.0;
    let mut weight = 0.0;
    let mut logs = Vec::with_capacity(cfg.device_rounds);

    for j in 0..cfg.device_rounds {
        let ct = select_uniform(&lan.devices, nc, device_selection_seed(cfg.seed, cloud_round, j, lan.lan_id()))?;
        let members: Vec<Member> = ct.iter().map(|&d| world.member(d)).collect();
        let topo = build_and_select_topology(&lan.net, &members, world.model_bytes)?;

        let trained = ct
            .iter()
            .map(|&d| train_device(world, &model, d, cfg, train_seed(cfg.seed, cloud_round, j, d)))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = ct.iter().map(|&d| sample_weight(world, d, weighted)).collect();
        model = if accounting_only {
            model
        } else {
            match &topo.kind {
                TopologyKind::Ps { .. } => {
                    let updates: Vec<(&ModelWeights, f64)> = trained.iter().zip(weights.iter().copied()).collect();
                    aggregate(&updates)?
                }
                TopologyKind::Ring { order } => {
                    let pos = |d: &usize| ct.iter().position(|c| c == d).unwrap();
                    let refs: Vec<&ModelWeights> = order.iter().map(|d| &trained[pos(d)]).collect();
                    let ws: Vec<f64> = order.iter().map(|d| weights[pos(d)]).collect();
                    ring_allreduce(&refs, &ws)?
                }
            }
        };
        weight = ct.iter().map(|&d| world.devices[d].sample_count as f64).sum();
        let train_t = cfg.train.local_epochs as f64 * max_epoch_time(world, &ct);
        elapsed += train_t + topo.comm_time_s;
        logs.push(DeviceRoundLog {
            ct,
            bl_mbps: topo.bl_mbps,
            topology: topo.kind,
            train_t,
            com_t_l: topo.comm_time_s,
        });
    }

    Ok(LanOutcome {
        model,
        log: LanLog {
            lan_id: lan.lan_id(),
            elapsed_s: elapsed,
            weight: if weighted { weight } else { 1.0 },
            device_rounds: logs,
        },
    })
}

/// LanFL: each cloud round picks `nl_s` LAN domains, runs `RL` device rounds
/// in each, and aggregates the returned LAN models in the cloud.
///
/// WAN traffic is one model download and one upload per selected LAN per
/// cloud round. The round's clock time is the WAN exchange plus the slowest
/// LAN's elapsed time.
pub fn run_lanfl(world: &World, cfg: &ProtocolConfig, cost: &CostModel) -> Result<RunOutput> {
    world.validate()?;
    cfg.validate_for(world, Protocol::Lanfl)?;
    let accounting_only = matches!(world.workload, Workload::AccountingOnly);
    let lan_indices: Vec<usize> = (0..world.lans.len()).collect();
    let one_way = wan_transfer_time(world.model_bytes, cfg.bw_mbps)?;
    let counts = if cfg.heterogeneity_balancing {
        Some(balance_device_counts(world, cfg.nc_s, &cfg.train)?)
    } else {
        None
    };

    let mut global = world.initial_weights();
    let mut progress = Progress::new(*cost);
    let mut rounds = Vec::with_capacity(cfg.cloud_rounds);

    for k in 0..cfg.cloud_rounds {
        let chosen = select_uniform(&lan_indices, cfg.nl_s, lan_selection_seed(cfg.seed, k))?;
        let outcomes = chosen
            .iter()
            .map(|&li| {
                let nc = counts.as_ref().map_or(cfg.nc_s, |c| c[li]);
                lan_orchestrate(world, li, &global, cfg, k, nc)
            })
            .collect::<Result<Vec<_>>>()?;

        let updates: Vec<(&ModelWeights, f64)> = outcomes.iter().map(|o| (&o.model, o.log.weight)).collect();
        global = combine(&updates, accounting_only)?;

        let slowest = outcomes
            .iter()
            .fold(&outcomes[0], |s, o| if o.log.elapsed_s > s.log.elapsed_s { o } else { s });
        let timing = RoundTiming {
            com_t_w: 2.0 * one_way,
            device_rounds: slowest
                .log
                .device_rounds
                .iter()
                .map(|d| (d.train_t, d.com_t_l))
                .collect(),
        };
        let moved = Traffic::from_bytes(world.model_bytes as u128 * chosen.len() as u128);
        rounds.push(CloudRoundLog {
            selected_lans: chosen.iter().map(|&li| world.lans[li].lan_id()).collect(),
            selected_devices: Vec::new(),
            lans: outcomes.into_iter().map(|o| o.log).collect(),
        });
        if progress.finish_round(world, cfg, &global, &timing, moved, moved)? {
            break;
        }
    }

    Ok(RunOutput {
        protocol: Protocol::Lanfl,
        metrics: progress.ledger.into_rounds(),
        rounds,
        final_weights: global,
        trajectory: progress.trajectory,
        convergence: progress.convergence,
        lan_device_counts: counts,
    })
}

pub fn run_protocol(protocol: Protocol, world: &World, cfg: &ProtocolConfig, cost: &CostModel) -> Result<RunOutput> {
    match protocol {
        Protocol::Wanfl => run_wan_fl(world, cfg, cost),
        Protocol::Lanfl => run_lanfl(world, cfg, cost),
    }
}
