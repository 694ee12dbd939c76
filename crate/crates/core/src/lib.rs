//! Deterministic IP networking with multiple cycle-length queue groups:
//! cycle algebra, topology, per-hop cycle mapping, capacity accounting,
//! admission planning and a packet-level simulator.

pub mod capacity_ledger;
pub mod cycle_forwarding;
pub mod error;
pub mod network_model;
pub mod planner;
pub mod simulator;
pub mod time_model;
pub mod workload;

pub use error::{Error, Result};
