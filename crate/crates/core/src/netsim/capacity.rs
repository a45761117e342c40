use super::wimax::{QosScope, WimaxConfig};
use super::wlan::WlanConfig;
use crate::protocol::{fragment_payload, VideoCallSpec, HEADER_LEN};
use serde::Serialize;

/// Breakdown of the simultaneous-call bound for one call profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CallCapacity {
    /// One direction of one call, protocol headers included, in bit/s.
    pub per_direction_bps: u64,
    /// WLAN: both directions of every call cross the leader's radio.
    pub wlan_bound: u32,
    /// `None` when each call direction fits inside its own service flow.
    pub wimax_bound: Option<u32>,
    /// WLAN bound with the per-frame link overhead also charged.
    pub wlan_link_overhead_bound: u32,
    /// WiMAX bound if the sustained rate were shared by all calls.
    pub wimax_aggregate_bound: u32,
    pub max_calls: u32,
}

fn direction_bps(call: &VideoCallSpec, mtu: u32, per_frame_extra: u32) -> u64 {
    let frags = fragment_payload(call.frame_bytes(), mtu).map_or(1, |f| f.len().max(1)) as u64;
    let bytes = call.frame_bytes() as u64 + frags * (HEADER_LEN as u64 + per_frame_extra as u64);
    bytes * 8 * call.frame_rate as u64
}

pub fn call_capacity(wlan: &WlanConfig, wimax: &WimaxConfig, call: &VideoCallSpec) -> CallCapacity {
    let per_dir = direction_bps(call, wlan.mtu, 0);
    let wlan_bound = (wlan.data_rate_bps / (2 * per_dir)) as u32;
    let with_overhead = direction_bps(call, wlan.mtu, wlan.overhead_bytes);
    let wlan_link_overhead_bound = (wlan.data_rate_bps / (2 * with_overhead)) as u32;
    let wimax_aggregate_bound = (wimax.max_sustained_bps / per_dir) as u32;
    let wimax_bound = match wimax.qos_scope {
        QosScope::Aggregate => Some(wimax_aggregate_bound),
        QosScope::PerServiceFlow if per_dir <= wimax.max_sustained_bps => None,
        QosScope::PerServiceFlow => Some(0),
    };
    CallCapacity {
        per_direction_bps: per_dir,
        wlan_bound,
        wimax_bound,
        wlan_link_overhead_bound,
        wimax_aggregate_bound,
        max_calls: wimax_bound.map_or(wlan_bound, |w| w.min(wlan_bound)),
    }
}

/// Largest number of concurrent video calls both links can carry.
pub fn max_simultaneous_calls(wlan: &WlanConfig, wimax: &WimaxConfig, call: &VideoCallSpec) -> u32 {
    call_capacity(wlan, wimax, call).max_calls
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bounds() {
        let (wl, wx) = (WlanConfig::default(), WimaxConfig::default());
        let got: Vec<u32> = VideoCallSpec::BANDWIDTHS
            .iter()
            .map(|&b| max_simultaneous_calls(&wl, &wx, &VideoCallSpec::new(b).unwrap()))
            .collect();
        assert_eq!(got, vec![13, 6, 4]);
    }

    #[test]
    fn aggregate_wimax_is_the_bottleneck() {
        let wx = WimaxConfig {
            qos_scope: QosScope::Aggregate,
            ..WimaxConfig::default()
        };
        let c = call_capacity(&WlanConfig::default(), &wx, &VideoCallSpec::new(2_000_000).unwrap());
        assert_eq!(c.wimax_bound, Some(4));
        assert_eq!(c.max_calls, 4);
        assert_eq!(c.wlan_link_overhead_bound, 11);
    }
}
