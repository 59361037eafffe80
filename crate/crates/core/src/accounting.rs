//! Run accounting: wall-clock time, WAN traffic, monetary cost and the
//! convergence test.
//!
//! Traffic is counted in whole bytes (`u128`) and only converted to GiB
//! (2^30 bytes) for reporting. Time is accumulated in seconds and reported in
//! hours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BYTES_PER_GIB: u64 = 1 << 30;
pub const BYTES_PER_MIB: u64 = 1 << 20;

/// Number of trailing rounds inspected by [`converged`].
pub const CONVERGENCE_WINDOW: usize = 20;
/// Standard deviation (percentage points) below which a window counts as flat.
pub const CONVERGENCE_STD_PP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// USD per hour of aggregation server time.
    pub hourly_rate: f64,
    /// USD per GiB sent from the cloud to devices.
    pub per_gb_downlink: f64,
    /// USD per GiB sent from devices to the cloud.
    pub uplink_rate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            hourly_rate: 0.204,
            per_gb_downlink: 0.09,
            uplink_rate: 0.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cost.hourly_rate", self.hourly_rate),
            ("cost.per_gb_downlink", self.per_gb_downlink),
            ("cost.uplink_rate", self.uplink_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::field(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn cost(&self, clock_hours: f64, downlink_gib: f64, uplink_gib: f64) -> f64 {
        self.hourly_rate * clock_hours + self.per_gb_downlink * downlink_gib + self.uplink_rate * uplink_gib
    }
}

/// `hourly_rate * clock_hours + per_gb_downlink * traffic_gb`.
pub fn monetary_cost(clock_hours: f64, traffic_gb: f64, cm: &CostModel) -> Result<f64> {
    if !(clock_hours >= 0.0) || !(traffic_gb >= 0.0) {
        return Err(Error::invalid("cost inputs must be nonnegative"));
    }
    Ok(cm.cost(clock_hours, traffic_gb, 0.0))
}

/// A byte count on the WAN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Traffic {
    pub bytes: u128,
}

impl Traffic {
    pub fn from_bytes(bytes: u128) -> Self {
        Traffic { bytes }
    }

    pub fn gib(&self) -> f64 {
        self.bytes as f64 / BYTES_PER_GIB as f64
    }

    /// Whole GiB, rounded down, as printed in reports.
    pub fn whole_gib(&self) -> u128 {
        self.bytes / BYTES_PER_GIB as u128
    }
}

impl std::ops::Add for Traffic {
    type Output = Traffic;
    fn add(self, rhs: Traffic) -> Traffic {
        Traffic::from_bytes(self.bytes + rhs.bytes)
    }
}

/// Cloud-to-device traffic for LanFL: one model per selected LAN per cloud round.
pub fn wan_traffic_lanfl(rw: u64, nl_s: u64, model_bytes: u64) -> Traffic {
    Traffic::from_bytes(rw as u128 * nl_s as u128 * model_bytes as u128)
}

/// Cloud-to-device traffic for WAN-FL: one model per selected device per round.
pub fn wan_traffic_wanfl(rw: u64, n_s: u64, model_bytes: u64) -> Traffic {
    Traffic::from_bytes(rw as u128 * n_s as u128 * model_bytes as u128)
}

/// Timing of one cloud round: the WAN exchange plus each device round's
/// `(train_t, com_t_l)` in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub com_t_w: f64,
    pub device_rounds: Vec<(f64, f64)>,
}

impl RoundTiming {
    pub fn sum_train(&self) -> f64 {
        self.device_rounds.iter().map(|d| d.0).sum()
    }

    pub fn sum_com_l(&self) -> f64 {
        self.device_rounds.iter().map(|d| d.1).sum()
    }

    pub fn seconds(&self) -> Result<f64> {
        let mut t = self.com_t_w;
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("negative WAN time {t}")));
        }
        for &(train, comm) in &self.device_rounds {
            if !(train >= 0.0 && comm >= 0.0) {
                return Err(Error::invalid(format!("negative device-round time ({train}, {comm})")));
            }
            t += train + comm;
        }
        Ok(t)
    }
}

/// Total wall-clock hours: sum over cloud rounds of the WAN time plus, for each
/// device round, training time and LAN communication time.
pub fn clock_time(rounds: &[RoundTiming]) -> Result<f64> {
    let mut secs = 0.0;
    for r in rounds {
        secs += r.seconds()?;
    }
    Ok(secs / 3600.0)
}

/// Result of the convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// 1-based cloud round at which the trailing window first became flat.
    pub round: usize,
    /// Mean accuracy (percent) over that window.
    pub window_mean: f64,
}

/// First round at which the sample standard deviation of the trailing
/// [`CONVERGENCE_WINDOW`] accuracies (in percent) drops below
/// [`CONVERGENCE_STD_PP`].
pub fn converged(accuracy_pct: &[f64]) -> Option<Convergence> {
    if accuracy_pct.len() < CONVERGENCE_WINDOW {
        return None;
    }
    (CONVERGENCE_WINDOW..=accuracy_pct.len()).find_map(|end| {
        let window = &accuracy_pct[end - CONVERGENCE_WINDOW..end];
        let (mean, std) = mean_std(window);
        (std < CONVERGENCE_STD_PP).then_some(Convergence {
            round: end,
            window_mean: mean,
        })
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-cloud-round metrics record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 1-based.
    pub cloud_round: usize,
    pub com_t_w: f64,
    pub sum_com_t_l: f64,
    pub sum_train_t: f64,
    /// Hours.
    pub cumulative_clock_time: f64,
    /// GiB, cloud to devices.
    pub cumulative_wan_traffic: f64,
    /// Test accuracy in `[0, 1]`; absent when training is stubbed out.
    pub accuracy: Option<f64>,
    /// USD.
    pub cumulative_cost: f64,
}

/// Running totals for a protocol run. Rounds must be recorded in order.
#[derive(Debug, Clone)]
pub struct Ledger {
    cost_model: CostModel,
    seconds: f64,
    downlink: Traffic,
    uplink: Traffic,
    rounds: Vec<RoundMetrics>,
}

impl Ledger {
    pub fn new(cost_model: CostModel) -> Self {
        Ledger {
            cost_model,
            seconds: 0.0,
            downlink: Traffic::default(),
            uplink: Traffic::default(),
            rounds: Vec::new(),
        }
    }

    pub fn record(
        &mut self,
        timing: &RoundTiming,
        downlink: Traffic,
        uplink: Traffic,
        accuracy: Option<f64>,
    ) -> Result<&RoundMetrics> {
        self.seconds += timing.seconds()?;
        self.downlink = self.downlink + downlink;
        self.uplink = self.uplink + uplink;
        let hours = self.seconds / 3600.0;
        self.rounds.push(RoundMetrics {
            cloud_round: self.rounds.len() + 1,
            com_t_w: timing.com_t_w,
            sum_com_t_l: timing.sum_com_l(),
            sum_train_t: timing.sum_train(),
            cumulative_clock_time: hours,
            cumulative_wan_traffic: self.downlink.gib(),
            accuracy,
            cumulative_cost: self.cost_model.cost(hours, self.downlink.gib(), self.uplink.gib()),
        });
        Ok(self.rounds.last().unwrap())
    }

    pub fn downlink(&self) -> Traffic {
        self.downlink
    }

    pub fn uplink(&self) -> Traffic {
        self.uplink
    }

    pub fn rounds(&self) -> &[RoundMetrics] {
        &self.rounds
    }

    pub fn into_rounds(self) -> Vec<RoundMetrics> {
        self.rounds
    }
}
