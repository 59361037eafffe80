use serde::{Deserialize, Serialize};

use super::formulas::{comm_time_ps, comm_time_ring};
use super::sharing::{Flow, LanDomainNet};
use crate::error::{Error, Result};

/// A device taking part in an intra-LAN exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub device_id: usize,
    pub ap_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    /// Star: every other member exchanges with `aggregator`.
    Ps { aggregator: usize, members: Vec<usize> },
    /// Each device sends to the next one in `order`, wrapping around.
    Ring { order: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkThroughput {
    pub from: usize,
    pub to: usize,
    pub mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub links: Vec<LinkThroughput>,
    /// Slowest link, the rate that gates the whole collective.
    pub bl_mbps: f64,
    /// Time for one intra-LAN aggregation on this topology.
    pub comm_time_s: f64,
}

impl Topology {
    pub fn is_ps(&self) -> bool {
        matches!(self.kind, TopologyKind::Ps { .. })
    }

    pub fn aggregator(&self) -> Option<usize> {
        match &self.kind {
            TopologyKind::Ps { aggregator, .. } => Some(*aggregator),
            TopologyKind::Ring { .. } => None,
        }
    }

    pub fn member_count(&self) -> usize {
        match &self.kind {
            TopologyKind::Ps { members, .. } => members.len(),
            TopologyKind::Ring { order } => order.len(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            TopologyKind::Ps { .. } => "ps",
            TopologyKind::Ring { .. } => "ring",
        }
    }
}

fn evaluate_links(
    lan: &LanDomainNet,
    members: &[Member],
    pairs: &[(usize, usize)],
) -> Result<(Vec<LinkThroughput>, f64)> {
    let ap_of = |d: usize| members.iter().find(|m| m.device_id == d).map(|m| m.ap_id).unwrap();
    let flows: Vec<Flow> = pairs
        .iter()
        .map(|&(a, b)| Flow {
            src_ap: ap_of(a),
            dst_ap: ap_of(b),
        })
        .collect();
    let rates = lan.estimate_flow_throughput(&flows)?;
    let links: Vec<LinkThroughput> = pairs
        .iter()
        .zip(&rates)
        .map(|(&(from, to), &mbps)| LinkThroughput { from, to, mbps })
        .collect();
    let bl = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((links, bl))
}

/// PS candidate with its aggregator on `ap`, or `None` if no member sits there.
pub fn ps_candidate(lan: &LanDomainNet, members: &[Member], ap: usize, model_bytes: u64) -> Result<Option<Topology>> {
    let Some(aggregator) = members.iter().filter(|m| m.ap_id == ap).map(|m| m.device_id).min() else {
        return Ok(None);
    };
    let pairs: Vec<(usize, usize)> = members
        .iter()
        .filter(|m| m.device_id != aggregator)
        .map(|m| (m.device_id, aggregator))
        .collect();
    let (links, bl) = evaluate_links(lan, members, &pairs)?;
    Ok(Some(Topology {
        kind: TopologyKind::Ps {
            aggregator,
            members: members.iter().map(|m| m.device_id).collect(),
        },
        links,
        bl_mbps: bl,
        comm_time_s: comm_time_ps(model_bytes, bl)?,
    }))
}

/// Ring candidate, members grouped AP by AP (then by device id) so that only
/// one link enters and one leaves each AP group.
pub fn ring_candidate(lan: &LanDomainNet, members: &[Member], model_bytes: u64) -> Result<Topology> {
    let mut sorted = members.to_vec();
    sorted.sort_by_key(|m| (m.ap_id, m.device_id));
    let order: Vec<usize> = sorted.iter().map(|m| m.device_id).collect();
    let n = order.len();
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let (links, bl) = evaluate_links(lan, members, &pairs)?;
    Ok(Topology {
        comm_time_s: comm_time_ring(model_bytes, bl, n)?,
        kind: TopologyKind::Ring { order },
        links,
        bl_mbps: bl,
    })
}

/// Enumerate PS (one candidate per AP hosting a member) and Ring, estimate
/// each one's intra-LAN aggregation time and keep the fastest. Ties go to PS,
/// then to the lower aggregator id.
pub fn build_and_select_topology(lan: &LanDomainNet, members: &[Member], model_bytes: u64) -> Result<Topology> {
    if members.len() < 2 {
        return Err(Error::TooFewMembers {
            needed: 2,
            got: members.len(),
        });
    }
    for (i, m) in members.iter().enumerate() {
        if members[..i].iter().any(|o| o.device_id == m.device_id) {
            return Err(Error::invalid(format!("device {} listed twice", m.device_id)));
        }
        if !lan.has_ap(m.ap_id) {
            return Err(Error::UnknownAccessPoint {
                lan: lan.lan_id,
                ap: m.ap_id,
            });
        }
    }

    let mut aps: Vec<usize> = members.iter().map(|m| m.ap_id).collect();
    aps.sort_unstable();
    aps.dedup();
    let mut candidates = Vec::with_capacity(aps.len() + 1);
    for ap in aps {
        if let Some(t) = ps_candidate(lan, members, ap, model_bytes)? {
            candidates.push(t);
        }
    }
    candidates.sort_by_key(|t| t.aggregator());
    candidates.push(ring_candidate(lan, members, model_bytes)?);

    let mut best: Option<Topology> = None;
    for cand in candidates {
        if best.as_ref().is_none_or(|b| cand.comm_time_s < b.comm_time_s) {
            best = Some(cand);
        }
    }
    Ok(best.expect("ring candidate always present"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::sharing::{AccessPoint, BandwidthMode};

    fn lan(n_aps: usize, cap: f64, mode: BandwidthMode) -> LanDomainNet {
        LanDomainNet {
            lan_id: 0,
            aps: (0..n_aps)
                .map(|ap_id| AccessPoint {
                    ap_id,
                    capacity_mbps: cap,
                })
                .collect(),
            mode,
        }
    }

    fn members(n: usize, n_aps: usize) -> Vec<Member> {
        (0..n)
            .map(|d| Member {
                device_id: d,
                ap_id: d * n_aps / n,
            })
            .collect()
    }

    #[test]
    fn two_devices_fixed_bl_tie_goes_to_ps() {
        let l = lan(1, 50.0, BandwidthMode::FixedBl { bl_mbps: 20.0 });
        let t = build_and_select_topology(&l, &members(2, 1), 1_000_000).unwrap();
        assert!(t.is_ps());
        assert_eq!(t.aggregator(), Some(0));
        let ring = ring_candidate(&l, &members(2, 1), 1_000_000).unwrap();
        assert_eq!(ring.comm_time_s, t.comm_time_s);
    }

    #[test]
    fn ring_groups_by_ap() {
        let l = lan(2, 100.0, BandwidthMode::CapacityModel { backbone_mbps: None });
        let ms = vec![
            Member { device_id: 5, ap_id: 1 },
            Member { device_id: 2, ap_id: 0 },
            Member { device_id: 9, ap_id: 1 },
            Member { device_id: 1, ap_id: 0 },
        ];
        let ring = ring_candidate(&l, &ms, 1).unwrap();
        assert_eq!(ring.kind, TopologyKind::Ring { order: vec![1, 2, 5, 9] });
        assert_eq!(ring.links.len(), 4);
    }

    #[test]
    fn ps_invariants() {
        let l = lan(4, 168.0, BandwidthMode::CapacityModel { backbone_mbps: Some(96.0) });
        let ms = members(8, 4);
        let t = ps_candidate(&l, &ms, 2, 1).unwrap().unwrap();
        let agg = t.aggregator().unwrap();
        assert_eq!(agg, 4);
        assert_eq!(t.links.len(), 7);
        assert!(t.links.iter().all(|lk| lk.to == agg && lk.from != agg));
    }

    #[test]
    fn rejects_bad_members() {
        let l = lan(1, 10.0, BandwidthMode::CapacityModel { backbone_mbps: None });
        assert!(matches!(
            build_and_select_topology(&l, &members(1, 1), 1),
            Err(Error::TooFewMembers { .. })
        ));
        let dup = vec![Member { device_id: 0, ap_id: 0 }; 2];
        assert!(build_and_select_topology(&l, &dup, 1).is_err());
        let stray = vec![Member { device_id: 0, ap_id: 0 }, Member { device_id: 1, ap_id: 7 }];
        assert!(matches!(
            build_and_select_topology(&l, &stray, 1),
            Err(Error::UnknownAccessPoint { ap: 7, .. })
        ));
    }

    #[test]
    fn selection_is_deterministic() {
        let l = lan(3, 120.0, BandwidthMode::CapacityModel { backbone_mbps: Some(50.0) });
        let ms = members(9, 3);
        let a = build_and_select_topology(&l, &ms, 10_000).unwrap();
        let b = build_and_select_topology(&l, &ms, 10_000).unwrap();
        assert_eq!(a, b);
    }
}
