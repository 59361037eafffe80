use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub ap_id: usize,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BandwidthMode {
    /// Every peer-to-peer link runs at `bl_mbps`, whatever else is happening.
    FixedBl { bl_mbps: f64 },
    /// Links share AP airtime. With `backbone_mbps` set, traffic between two
    /// APs also crosses each AP's wired uplink (full duplex, `backbone_mbps`
    /// per direction).
    CapacityModel { backbone_mbps: Option<f64> },
}

/// Network side of a LAN domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanDomainNet {
    pub lan_id: usize,
    pub aps: Vec<AccessPoint>,
    pub mode: BandwidthMode,
}

/// A transfer from a device on `src_ap` to a device on `dst_ap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub src_ap: usize,
    pub dst_ap: usize,
}

impl LanDomainNet {
    pub fn validate(&self) -> Result<()> {
        if self.aps.is_empty() {
            return Err(Error::invalid(format!("LAN {} has no access points", self.lan_id)));
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if !(ap.capacity_mbps > 0.0 && ap.capacity_mbps.is_finite()) {
                return Err(Error::invalid(format!(
                    "AP {} in LAN {} has non-positive capacity",
                    ap.ap_id, self.lan_id
                )));
            }
            if self.aps[..i].iter().any(|a| a.ap_id == ap.ap_id) {
                return Err(Error::invalid(format!("duplicate AP id {} in LAN {}", ap.ap_id, self.lan_id)));
            }
        }
        match self.mode {
            BandwidthMode::FixedBl { bl_mbps } if !(bl_mbps > 0.0 && bl_mbps.is_finite()) => {
                Err(Error::invalid(format!("LAN {} has non-positive BL", self.lan_id)))
            }
            BandwidthMode::CapacityModel {
                backbone_mbps: Some(b),
            } if !(b > 0.0 && b.is_finite()) => {
                Err(Error::invalid(format!("LAN {} has non-positive backbone rate", self.lan_id)))
            }
            _ => Ok(()),
        }
    }

    fn ap_index(&self, ap: usize) -> Result<usize> {
        self.aps
            .iter()
            .position(|a| a.ap_id == ap)
            .ok_or(Error::UnknownAccessPoint {
                lan: self.lan_id,
                ap,
            })
    }

    pub fn has_ap(&self, ap: usize) -> bool {
        self.aps.iter().any(|a| a.ap_id == ap)
    }

    /// Per-flow throughput (Mbps) when all `flows` run at once.
    ///
    /// Capacity model: an AP's capacity is split equally among the flows
    /// touching it (the source AP, plus the destination AP if different), and
    /// a flow gets the minimum share along its path. Cross-AP flows also share
    /// the backbone egress of the source AP and ingress of the destination AP.
    pub fn estimate_flow_throughput(&self, flows: &[Flow]) -> Result<Vec<f64>> {
        let idx: Vec<(usize, usize)> = flows
            .iter()
            .map(|f| Ok((self.ap_index(f.src_ap)?, self.ap_index(f.dst_ap)?)))
            .collect::<Result<_>>()?;
        match self.mode {
            BandwidthMode::FixedBl { bl_mbps } => Ok(vec![bl_mbps; flows.len()]),
            BandwidthMode::CapacityModel { backbone_mbps } => {
                let n = self.aps.len();
                let mut radio = vec![0usize; n];
                let mut egress = vec![0usize; n];
                let mut ingress = vec![0usize; n];
                for &(s, d) in &idx {
                    radio[s] += 1;
                    if d != s {
                        radio[d] += 1;
                        egress[s] += 1;
                        ingress[d] += 1;
                    }
                }
                Ok(idx
                    .iter()
                    .map(|&(s, d)| {
                        let mut t = self.aps[s].capacity_mbps / radio[s] as f64;
                        if d != s {
                            t = t.min(self.aps[d].capacity_mbps / radio[d] as f64);
                            if let Some(b) = backbone_mbps {
                                t = t.min(b / egress[s] as f64).min(b / ingress[d] as f64);
                            }
                        }
                        t
                    })
                    .collect())
            }
        }
    }
}

/// Free-function form of [`LanDomainNet::estimate_flow_throughput`].
pub fn estimate_flow_throughput(lan: &LanDomainNet, flows: &[Flow]) -> Result<Vec<f64>> {
    lan.estimate_flow_throughput(flows)
}
