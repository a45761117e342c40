//! 802.11a-class WLAN between the leader and the slave drones.
//!
//! Every drone owns a transmit interface (rate server with a bounded buffer)
//! and a receive-side packet processor (fixed service time per packet). There
//! is no contention model: a frame occupies only its sender's interface.

use super::metrics::LinkStats;
use super::packet::{NodeSet, Packet};
use super::NetEvent;
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Per-frame overhead fitted to the measured 8549 bit/s per-SD flight
/// traffic (0.1 status/s plus 5 waypoint ACKs/s), see [`calibrate_overhead`].
pub const CALIBRATED_OVERHEAD_BYTES: u32 = 199;
/// MAC + LLC + IPv6 + UDP headers without PHY framing.
pub const HEADER_STACK_OVERHEAD_BYTES: u32 = 90;
pub const DATA_RATES_MBPS: [u64; 8] = [6, 9, 12, 18, 24, 36, 48, 54];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WlanConfig {
    pub data_rate_bps: u64,
    pub buffer_bits: u64,
    pub proc_rate: u64,
    pub overhead_bytes: u32,
    pub edca: bool,
    pub mtu: u32,
}

impl Default for WlanConfig {
    fn default() -> Self {
        Self {
            data_rate_bps: 54_000_000,
            buffer_bits: 1_000_000,
            proc_rate: 10_000,
            overhead_bytes: CALIBRATED_OVERHEAD_BYTES,
            edca: false,
            mtu: 1500,
        }
    }
}

impl WlanConfig {
    pub fn frame_bits(&self, wire_bytes: u32) -> u64 {
        (wire_bytes as u64 + self.overhead_bytes as u64) * 8
    }

    pub fn tx_time(&self, wire_bytes: u32) -> Micros {
        tx_time(self.frame_bits(wire_bytes), self.data_rate_bps)
    }

    pub fn proc_time(&self) -> Micros {
        crate::MICROS_PER_SEC.div_ceil(self.proc_rate)
    }
}

/// Serialization time of `bits` at `rate_bps`, rounded up to whole microseconds.
pub fn tx_time(bits: u64, rate_bps: u64) -> Micros {
    (bits as u128 * crate::MICROS_PER_SEC as u128).div_ceil(rate_bps as u128) as Micros
}

/// Solves the per-frame overhead `h` from a measured bit rate:
/// `target_bps = sum(rate_i * (wire_bytes_i + h) * 8)` over `(pkt/s, wire bytes)` flows.
pub fn calibrate_overhead(target_bps: f64, flows: &[(f64, u32)]) -> f64 {
    let pkt_rate: f64 = flows.iter().map(|(r, _)| r).sum();
    let payload_bps: f64 = flows.iter().map(|(r, b)| r * *b as f64 * 8.0).sum();
    (target_bps - payload_bps) / (8.0 * pkt_rate)
}

#[derive(Default)]
struct TxInterface {
    // Indexed by AccessClass::priority_index; only slot 0 is used without EDCA.
    queues: [VecDeque<Packet>; 3],
    queued_bits: u64,
    busy: Option<Packet>,
}

#[derive(Default)]
struct Processor {
    queue: VecDeque<Packet>,
    queued_bits: u64,
    busy: Option<Packet>,
}

pub struct WlanLink {
    pub cfg: WlanConfig,
    tx: Vec<TxInterface>,
    rx: Vec<Processor>,
    attached: NodeSet,
}

impl WlanLink {
    pub fn new(cfg: WlanConfig, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let attached: NodeSet = nodes.into_iter().collect();
        let slots = attached.iter().map(|n| n.index() + 1).max().unwrap_or(0);
        Self {
            cfg,
            tx: (0..slots).map(|_| TxInterface::default()).collect(),
            rx: (0..slots).map(|_| Processor::default()).collect(),
            attached,
        }
    }

    pub fn is_attached(&self, node: NodeId) -> bool {
        self.attached.contains(node)
    }

    pub fn attached(&self) -> NodeSet {
        self.attached
    }

    /// Queues `pkt` at its sender. Receivers that are not attached are
    /// dropped immediately; a full buffer drops every copy.
    pub fn enqueue(&mut self, now: Micros, mut pkt: Packet, stats: &mut LinkStats, sched: &mut Vec<(Micros, NetEvent)>) {
        let bits = self.cfg.frame_bits(pkt.wire_bytes);
        let sender = pkt.hop_src;
        pkt.receivers.remove(sender);
        stats.offer(pkt.receivers.len() as u64, bits);
        if !self.attached.contains(sender) {
            stats.drop_copies(pkt.receivers.len() as u64, bits);
            return;
        }
        let mut reachable = pkt.receivers;
        for r in pkt.receivers.iter() {
            if !self.attached.contains(r) {
                reachable.remove(r);
                stats.drop_copies(1, bits);
            }
        }
        pkt.receivers = reachable;
        if pkt.receivers.is_empty() {
            return;
        }
        let buffer = self.cfg.buffer_bits;
        let iface = &mut self.tx[sender.index()];
        let occupancy = iface.queued_bits + iface.busy.as_ref().map_or(0, |p| self.cfg.frame_bits(p.wire_bytes));
        if occupancy + bits > buffer {
            stats.drop_copies(pkt.receivers.len() as u64, bits);
            return;
        }
        pkt.hop_start = now;
        let slot = if self.cfg.edca { pkt.class.priority_index() } else { 0 };
        iface.queues[slot].push_back(pkt);
        iface.queued_bits += bits;
        self.start_tx(now, sender, sched);
    }

    fn start_tx(&mut self, now: Micros, node: NodeId, sched: &mut Vec<(Micros, NetEvent)>) {
        let cfg = self.cfg;
        let iface = &mut self.tx[node.index()];
        if iface.busy.is_some() {
            return;
        }
        let Some(pkt) = iface.queues.iter_mut().find_map(VecDeque::pop_front) else {
            return;
        };
        iface.queued_bits -= cfg.frame_bits(pkt.wire_bytes);
        sched.push((now + cfg.tx_time(pkt.wire_bytes), NetEvent::WlanTxDone(node)));
        iface.busy = Some(pkt);
    }

    pub fn on_tx_done(&mut self, now: Micros, node: NodeId, stats: &mut LinkStats, sched: &mut Vec<(Micros, NetEvent)>) {
        let Some(pkt) = self.tx.get_mut(node.index()).and_then(|i| i.busy.take()) else {
            return;
        };
        let bits = self.cfg.frame_bits(pkt.wire_bytes);
        for r in pkt.receivers.iter() {
            if !self.attached.contains(r) {
                stats.drop_copies(1, bits);
                continue;
            }
            let proc = &mut self.rx[r.index()];
            if proc.queued_bits + bits > self.cfg.buffer_bits {
                stats.drop_copies(1, bits);
                continue;
            }
            let mut copy = pkt.clone();
            copy.receivers = NodeSet::single(r);
            proc.queued_bits += bits;
            proc.queue.push_back(copy);
            self.start_proc(now, r, sched);
        }
        self.start_tx(now, node, sched);
    }

    fn start_proc(&mut self, now: Micros, node: NodeId, sched: &mut Vec<(Micros, NetEvent)>) {
        let proc = &mut self.rx[node.index()];
        if proc.busy.is_some() {
            return;
        }
        if let Some(pkt) = proc.queue.pop_front() {
            proc.busy = Some(pkt);
            sched.push((now + self.cfg.proc_time(), NetEvent::WlanProcDone(node)));
        }
    }

    /// Finishes processing at `node`; returns the delivered copy.
    pub fn on_proc_done(&mut self, now: Micros, node: NodeId, sched: &mut Vec<(Micros, NetEvent)>) -> Option<Packet> {
        let pkt = self.rx.get_mut(node.index())?.busy.take()?;
        self.rx[node.index()].queued_bits -= self.cfg.frame_bits(pkt.wire_bytes);
        self.start_proc(now, node, sched);
        Some(pkt)
    }

    /// Removes `node` from the WLAN; everything it holds is dropped.
    pub fn detach(&mut self, node: NodeId, stats: &mut LinkStats) {
        if !self.attached.contains(node) {
            return;
        }
        self.attached.remove(node);
        let cfg = self.cfg;
        let iface = &mut self.tx[node.index()];
        for pkt in iface.queues.iter_mut().flat_map(|q| q.drain(..)).chain(iface.busy.take()) {
            stats.drop_copies(pkt.receivers.len() as u64, cfg.frame_bits(pkt.wire_bytes));
        }
        iface.queued_bits = 0;
        let proc = &mut self.rx[node.index()];
        for pkt in proc.queue.drain(..).chain(proc.busy.take()) {
            stats.drop_copies(1, cfg.frame_bits(pkt.wire_bytes));
        }
        proc.queued_bits = 0;
    }

    /// Bits waiting or in service at `node`'s transmit interface.
    pub fn tx_occupancy(&self, node: NodeId) -> u64 {
        let i = &self.tx[node.index()];
        i.queued_bits + i.busy.as_ref().map_or(0, |p| self.cfg.frame_bits(p.wire_bytes))
    }

    pub fn queued_by_class(&self, node: NodeId) -> [usize; 3] {
        let i = &self.tx[node.index()];
        let mut out = [0; 3];
        for q in &i.queues {
            for p in q {
                out[p.class.priority_index()] += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tx_time_examples() {
        let cfg = WlanConfig {
            overhead_bytes: HEADER_STACK_OVERHEAD_BYTES,
            ..WlanConfig::default()
        };
        // 21-byte status + 90 bytes overhead = 888 bits.
        assert_eq!(cfg.tx_time(21), 17);
        assert_eq!(cfg.proc_time(), 100);
        let slow = WlanConfig { data_rate_bps: 6_000_000, ..cfg };
        assert_eq!(slow.tx_time(21), 148);
    }

    #[test]
    fn calibration_solves_overhead() {
        // 0.1 status/s (21 wire bytes) + 5 ACK/s (10 wire bytes) -> 8549 bit/s.
        let h = calibrate_overhead(8549.0, &[(0.1, 21), (5.0, 10)]);
        assert!((h - 199.3).abs() < 0.1, "{h}");
        assert_eq!(h.round() as u32, CALIBRATED_OVERHEAD_BYTES);
    }
}
