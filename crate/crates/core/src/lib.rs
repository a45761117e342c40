//! Discrete-event simulator of a leader/follower UAV swarm that collects field
//! data for a ground Data Management Center (DMC).
//!
//! The crate is split along the system's concerns:
//!
//! * [`protocol`]: message kinds, payload lengths, wire codec, traffic generators.
//! * [`swarm`]: drone state, phase machine, formation geometry, task assignment.
//! * [`failure`]: leader handover (hard and soft), slave-drone reallocation and isolation.
//! * [`netsim`]: event queue, WLAN and WiMAX link models, metrics.
//! * [`energy`]: payload derating, flight-time budgets, battery sizing.
//! * [`runner`]: scenario configs, end-to-end orchestration, sweeps, CSV/report output.

pub mod energy;
pub mod failure;
pub mod netsim;
pub mod protocol;
pub mod runner;
pub mod swarm;

use serde::{Deserialize, Serialize};
use std::fmt;

/// Simulation timestamps and durations, in integer microseconds.
pub type Micros = u64;

pub const MICROS_PER_SEC: Micros = 1_000_000;

/// Converts seconds to whole microseconds, rounding to nearest.
pub fn secs_to_micros(secs: f64) -> Micros {
    (secs * MICROS_PER_SEC as f64).round() as Micros
}

pub fn micros_to_secs(us: Micros) -> f64 {
    us as f64 / MICROS_PER_SEC as f64
}

/// Network address of a drone, the DMC, or the broadcast group.
///
/// Drones use `0..=253`; the leader created by `init_swarm` is always 0 and
/// the slave drones are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u8);

impl NodeId {
    pub const DMC: NodeId = NodeId(254);
    pub const BROADCAST: NodeId = NodeId(255);
    pub const MAX_DRONES: usize = 254;

    pub fn is_drone(self) -> bool {
        self.0 < 254
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodeId::DMC => write!(f, "DMC"),
            NodeId::BROADCAST => write!(f, "*"),
            NodeId(id) => write!(f, "D{id}"),
        }
    }
}
