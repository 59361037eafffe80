//! Deterministic simulator for federated learning over LAN domains.
//!
//! Devices are grouped into LAN domains. Plain WAN federated learning
//! ([`orchestrator::run_wan_fl`]) sends every aggregation across the wide-area
//! link; the LAN-aware protocol ([`orchestrator::run_lanfl`]) runs several
//! cheap intra-LAN aggregation rounds (parameter server or ring all-reduce,
//! whichever the LAN's access points make faster) between WAN exchanges.
//! [`accounting`] turns the resulting event stream into clock time, WAN
//! traffic and dollars, and [`harness`] wraps everything into reproducible
//! config-driven runs.
//!
//! ```
//! use lanfl::harness::{execute, RunConfig};
//!
//! let cfg = RunConfig::from_json(r#"{
//!     "protocol": "lanfl",
//!     "world": {"lans": 4, "devices_per_lan": 5},
//!     "dataset": {"kind": "accounting_only"},
//!     "model_mib": 25,
//!     "params": {"cloud_rounds": 3, "nl_s": 2, "nc_s": 5}
//! }"#)?;
//! let log = execute(&cfg)?;
//! // Two LANs download the 25 MiB model per round.
//! assert!((log.summary.wan_traffic_gb - 3.0 * 2.0 * 25.0 / 1024.0).abs() < 1e-12);
//! # Ok::<(), lanfl::Error>(())
//! ```

pub mod accounting;
mod error;
pub mod fl;
pub mod harness;
pub mod net;
pub mod orchestrator;
pub mod seed;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/bandwidth.md")]
    pub mod bandwidth {}
    #[doc = include_str!("../../../book/src/topology.md")]
    pub mod topology {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    pub mod protocols {}
    #[doc = include_str!("../../../book/src/accounting.md")]
    pub mod accounting {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
