use crate::error::{Error, Result};
use crate::fl::TrainConfig;
use crate::net::{build_and_select_topology, Member};

use super::world::{LanDomain, World};

/// Devices of `lan` ordered so that every prefix is spread across APs
/// (first device of each AP, then the second of each, ...).
fn spread_members(world: &World, lan: &LanDomain) -> Vec<Member> {
    let mut keyed: Vec<(usize, usize, usize)> = Vec::with_capacity(lan.devices.len());
    let mut seen_per_ap: Vec<(usize, usize)> = Vec::new();
    for &d in &lan.devices {
        let ap = world.devices[d].ap_id;
        let rank = match seen_per_ap.iter_mut().find(|(a, _)| *a == ap) {
            Some((_, r)) => {
                *r += 1;
                *r
            }
            None => {
                seen_per_ap.push((ap, 0));
                0
            }
        };
        keyed.push((rank, ap, d));
    }
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, ap, d)| Member { device_id: d, ap_id: ap }).collect()
}

/// Estimated duration of one device round in `lan` with `n` participants:
/// local training of the slowest participant plus the selected topology's
/// communication time.
pub fn estimate_device_round(world: &World, lan: &LanDomain, n: usize, train: &TrainConfig) -> Result<f64> {
    let members = spread_members(world, lan);
    if n < 2 || n > members.len() {
        return Err(Error::invalid(format!("cannot estimate LAN {} with {n} devices", lan.lan_id())));
    }
    let chosen = &members[..n];
    let slowest = chosen
        .iter()
        .map(|m| world.devices[m.device_id].epoch_compute_time)
        .fold(0.0, f64::max);
    let topo = build_and_select_topology(&lan.net, chosen, world.model_bytes)?;
    Ok(train.local_epochs as f64 * slowest + topo.comm_time_s)
}

/// Per-LAN device counts that equalise device-round pace.
///
/// The reference pace is the estimated device-round time at `base_nc_s` of
/// the median-bandwidth LAN (bandwidth = gating link rate of its topology at
/// `base_nc_s`). Every LAN then gets the count in `[2, NC]` whose estimate is
/// closest to that pace, preferring the larger count on ties.
pub fn balance_device_counts(world: &World, base_nc_s: usize, train: &TrainConfig) -> Result<Vec<usize>> {
    if base_nc_s < 2 {
        return Err(Error::invalid("base device count must be >= 2"));
    }
    let mut bandwidth = Vec::with_capacity(world.lans.len());
    for lan in &world.lans {
        if lan.device_count() < 2 {
            return Err(Error::TooFewMembers {
                needed: 2,
                got: lan.device_count(),
            });
        }
        let n = base_nc_s.min(lan.device_count());
        let members = spread_members(world, lan);
        bandwidth.push(build_and_select_topology(&lan.net, &members[..n], world.model_bytes)?.bl_mbps);
    }
    let mut order: Vec<usize> = (0..world.lans.len()).collect();
    order.sort_by(|&a, &b| bandwidth[a].partial_cmp(&bandwidth[b]).unwrap().then(a.cmp(&b)));
    let median = &world.lans[order[(order.len() - 1) / 2]];
    let reference = estimate_device_round(world, median, base_nc_s.min(median.device_count()), train)?;

    world
        .lans
        .iter()
        .map(|lan| {
            let mut best = (2usize, f64::INFINITY);
            for n in 2..=lan.device_count() {
                let gap = (estimate_device_round(world, lan, n, train)? - reference).abs();
                if gap <= best.1 {
                    best = (n, gap);
                }
            }
            Ok(best.0)
        })
        .collect()
}
