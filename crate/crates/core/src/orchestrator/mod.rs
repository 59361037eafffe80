//! Protocol engines (WAN-FL and LanFL), LAN/device selection and the
//! heterogeneity balancer.

mod balance;
mod protocol;
mod select;
mod world;

pub use balance::{balance_device_counts, estimate_device_round};
pub use protocol::{
    device_selection_seed, lan_orchestrate, lan_selection_seed, run_lanfl, run_protocol, run_wan_fl, train_seed,
    CloudRoundLog, DeviceRoundLog, LanLog, LanOutcome, RunOutput,
};
pub use select::select_uniform;
pub use world::{DeviceProfile, LanDomain, Protocol, ProtocolConfig, Workload, World};
