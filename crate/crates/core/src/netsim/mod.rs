//! Discrete-event engine and the WLAN / WiMAX link models.

mod capacity;
mod event;
mod metrics;
mod network;
mod packet;
mod trace;
pub mod wimax;
pub mod wlan;

pub use capacity::{call_capacity, max_simultaneous_calls, CallCapacity};
pub use event::EventQueue;
pub use metrics::{
    FlowDir, FlowStats, LatencySummary, LinkId, LinkStats, MetricsRecord, Samples, TrafficMode,
};
pub use network::{Delivery, NetEvent, Network, Offered};
pub use packet::{NodeSet, Packet};
pub use trace::{service_position, simulate_wimax_trace, simulate_wlan_trace, TraceArrival, TraceResult};
pub use wimax::{QosScope, WimaxConfig, WimaxDir, WimaxLink};
pub use wlan::{WlanConfig, WlanLink};

use crate::Micros;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("cannot schedule at {at} us, clock is already at {now} us")]
    ScheduleInPast { at: Micros, now: Micros },
    #[error("MTU {0} leaves no room for the packet header")]
    Mtu(u32),
    #[error("WLAN MTU {wlan} and WiMAX MTU {wimax} must match for relaying")]
    MtuMismatch { wlan: u32, wimax: u32 },
    #[error("metrics requested before the run started")]
    NotStarted,
}
