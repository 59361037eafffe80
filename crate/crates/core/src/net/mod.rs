//! Intra-LAN network model: access-point bandwidth sharing, PS/Ring topology
//! construction and selection, and the communication-time formulas.

mod allreduce;
mod formulas;
mod sharing;
mod topology;

pub use allreduce::{ring_allreduce, ring_allreduce_all};
pub use formulas::{comm_time_ps, comm_time_ring, megabits, ring_coefficient, wan_transfer_time};
pub use sharing::{estimate_flow_throughput, AccessPoint, BandwidthMode, Flow, LanDomainNet};
pub use topology::{
    build_and_select_topology, ps_candidate, ring_candidate, LinkThroughput, Member, Topology,
    TopologyKind,
};
