//! WiMAX-class long-range link between the acting leader and the DMC.
//!
//! Each service flow is shaped by a token bucket at the maximum sustained
//! rate and served at that rate. Real-time packets (video, case reports)
//! draw on a second bucket at the minimum reserved rate; while it holds
//! tokens the real-time head goes first, otherwise service is by arrival.

use super::metrics::LinkStats;
use super::packet::Packet;
use super::wlan::tx_time;
use super::NetEvent;
use crate::Micros;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosScope {
    /// Rates apply to each service flow separately (one per call direction).
    #[default]
    PerServiceFlow,
    /// Rates apply to everything crossing the link in one direction.
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WimaxConfig {
    pub max_sustained_bps: u64,
    pub min_reserved_bps: u64,
    pub buffer_bits: u64,
    pub overhead_bytes: u32,
    pub mtu: u32,
    pub qos_scope: QosScope,
    /// Bucket depth expressed as time at the sustained rate.
    pub bucket_depth_us: Micros,
    /// Extra one-way delay when the acting leader lacks the WiMAX adapter.
    pub backup_penalty_us: Micros,
}

impl Default for WimaxConfig {
    fn default() -> Self {
        Self {
            max_sustained_bps: 10_000_000,
            min_reserved_bps: 5_000_000,
            buffer_bits: 1_000_000,
            overhead_bytes: 54,
            mtu: 1500,
            qos_scope: QosScope::PerServiceFlow,
            bucket_depth_us: 100_000,
            backup_penalty_us: 0,
        }
    }
}

impl WimaxConfig {
    pub fn frame_bits(&self, wire_bytes: u32) -> u64 {
        (wire_bytes as u64 + self.overhead_bytes as u64) * 8
    }

    pub fn tx_time(&self, wire_bytes: u32) -> Micros {
        tx_time(self.frame_bits(wire_bytes), self.max_sustained_bps)
    }

    fn depth_bits(&self, rate: u64) -> u64 {
        (rate as u128 * self.bucket_depth_us as u128 / crate::MICROS_PER_SEC as u128) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WimaxDir {
    Uplink,
    Downlink,
}

/// Best-effort service flow: statuses and acknowledgements.
pub const FLOW_BE: u32 = 0;
/// Real-time polling flow for case reports.
pub const FLOW_RT: u32 = 1;
/// Video flow of call `k` uses `FLOW_VIDEO_BASE + k`.
pub const FLOW_VIDEO_BASE: u32 = 2;

pub type ServerKey = (WimaxDir, u32);

/// Token bucket with tokens kept in bit·µs/s units so refills stay exact.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    rate_bps: u64,
    depth: u128,
    tokens: u128,
    last: Micros,
}

impl TokenBucket {
    pub fn new(rate_bps: u64, depth_bits: u64) -> Self {
        let depth = depth_bits as u128 * crate::MICROS_PER_SEC as u128;
        Self {
            rate_bps,
            depth,
            tokens: depth,
            last: 0,
        }
    }

    pub fn refill(&mut self, now: Micros) {
        if now > self.last {
            let add = (now - self.last) as u128 * self.rate_bps as u128;
            self.tokens = (self.tokens + add).min(self.depth);
            self.last = now;
        }
    }

    pub fn covers(&self, bits: u64) -> bool {
        self.tokens >= bits as u128 * crate::MICROS_PER_SEC as u128
    }

    /// Time until `bits` tokens are available (0 if already).
    pub fn wait_for(&self, bits: u64) -> Micros {
        let need = bits as u128 * crate::MICROS_PER_SEC as u128;
        if self.tokens >= need || self.rate_bps == 0 {
            return 0;
        }
        (need - self.tokens).div_ceil(self.rate_bps as u128) as Micros
    }

    pub fn take(&mut self, bits: u64) {
        self.tokens = self
            .tokens
            .saturating_sub(bits as u128 * crate::MICROS_PER_SEC as u128);
    }

    pub fn tokens_bits(&self) -> f64 {
        self.tokens as f64 / crate::MICROS_PER_SEC as f64
    }
}

struct Server {
    rt: VecDeque<Packet>,
    be: VecDeque<Packet>,
    queued_bits: u64,
    busy: Option<Packet>,
    sustained: TokenBucket,
    reserved: TokenBucket,
    wake_pending: bool,
}

impl Server {
    fn new(cfg: &WimaxConfig, now: Micros) -> Self {
        let mut sustained = TokenBucket::new(cfg.max_sustained_bps, cfg.depth_bits(cfg.max_sustained_bps));
        let mut reserved = TokenBucket::new(cfg.min_reserved_bps, cfg.depth_bits(cfg.min_reserved_bps));
        sustained.last = now;
        reserved.last = now;
        Self {
            rt: VecDeque::new(),
            be: VecDeque::new(),
            queued_bits: 0,
            busy: None,
            sustained,
            reserved,
            wake_pending: false,
        }
    }
}

pub struct WimaxLink {
    pub cfg: WimaxConfig,
    servers: BTreeMap<ServerKey, Server>,
}

impl WimaxLink {
    pub fn new(cfg: WimaxConfig) -> Self {
        Self {
            cfg,
            servers: BTreeMap::new(),
        }
    }

    pub fn key(&self, dir: WimaxDir, flow: u32) -> ServerKey {
        match self.cfg.qos_scope {
            QosScope::PerServiceFlow => (dir, flow),
            QosScope::Aggregate => (dir, FLOW_BE),
        }
    }

    /// Offers one copy of `pkt` on `key`'s server. Over-buffer arrivals drop.
    pub fn enqueue(
        &mut self,
        now: Micros,
        key: ServerKey,
        mut pkt: Packet,
        stats: &mut LinkStats,
        sched: &mut Vec<(Micros, NetEvent)>,
    ) {
        let cfg = self.cfg;
        let bits = cfg.frame_bits(pkt.wire_bytes);
        stats.offer(1, bits);
        let server = self.servers.entry(key).or_insert_with(|| Server::new(&cfg, now));
        if server.queued_bits + bits > cfg.buffer_bits {
            stats.drop_copies(1, bits);
            return;
        }
        pkt.hop_start = now;
        server.queued_bits += bits;
        if pkt.msg.kind.is_real_time() {
            server.rt.push_back(pkt);
        } else {
            server.be.push_back(pkt);
        }
        self.try_start(now, key, sched);
    }

    fn try_start(&mut self, now: Micros, key: ServerKey, sched: &mut Vec<(Micros, NetEvent)>) {
        let cfg = self.cfg;
        let Some(s) = self.servers.get_mut(&key) else {
            return;
        };
        if s.busy.is_some() || s.wake_pending {
            return;
        }
        s.sustained.refill(now);
        s.reserved.refill(now);
        let take_rt = match (s.rt.front(), s.be.front()) {
            (None, None) => return,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(r), Some(b)) => {
                s.reserved.covers(cfg.frame_bits(r.wire_bytes)) || r.hop_start <= b.hop_start
            }
        };
        let head = if take_rt { s.rt.front() } else { s.be.front() };
        let bits = cfg.frame_bits(head.expect("non-empty").wire_bytes);
        let wait = s.sustained.wait_for(bits);
        if wait > 0 {
            s.wake_pending = true;
            sched.push((now + wait, NetEvent::WimaxWake(key)));
            return;
        }
        let pkt = if take_rt { s.rt.pop_front() } else { s.be.pop_front() }.expect("non-empty");
        s.sustained.take(bits);
        if take_rt {
            s.reserved.take(bits);
        }
        s.queued_bits -= bits;
        sched.push((now + tx_time(bits, cfg.max_sustained_bps), NetEvent::WimaxTxDone(key)));
        s.busy = Some(pkt);
    }

    pub fn on_wake(&mut self, now: Micros, key: ServerKey, sched: &mut Vec<(Micros, NetEvent)>) {
        if let Some(s) = self.servers.get_mut(&key) {
            s.wake_pending = false;
        }
        self.try_start(now, key, sched);
    }

    /// Completes the transmission on `key`; returns the sent packet.
    pub fn on_tx_done(&mut self, now: Micros, key: ServerKey, sched: &mut Vec<(Micros, NetEvent)>) -> Option<Packet> {
        let pkt = self.servers.get_mut(&key)?.busy.take()?;
        self.try_start(now, key, sched);
        Some(pkt)
    }

    /// Drops every uplink packet still held for `node`.
    pub fn purge_sender(&mut self, node: crate::NodeId, stats: &mut LinkStats) {
        let cfg = self.cfg;
        for ((dir, _), s) in self.servers.iter_mut() {
            if *dir != WimaxDir::Uplink {
                continue;
            }
            for q in [&mut s.rt, &mut s.be] {
                q.retain(|p| {
                    if p.hop_src == node {
                        let bits = cfg.frame_bits(p.wire_bytes);
                        stats.drop_copies(1, bits);
                        s.queued_bits -= bits;
                        false
                    } else {
                        true
                    }
                });
            }
        }
    }

    pub fn queued_bits(&self, key: ServerKey) -> u64 {
        self.servers.get(&key).map_or(0, |s| s.queued_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mtu_frame_serialization() {
        let cfg = WimaxConfig::default();
        // 1500 wire bytes + 54 overhead at 10 Mbit/s.
        assert_eq!(cfg.tx_time(1500), 1244);
    }

    #[test]
    fn bucket_refill_and_wait() {
        let mut b = TokenBucket::new(1_000_000, 1000);
        assert!(b.covers(1000));
        b.take(1000);
        assert_eq!(b.wait_for(500), 500);
        b.refill(250);
        assert!((b.tokens_bits() - 250.0).abs() < 1e-9);
        b.refill(10_000);
        assert!((b.tokens_bits() - 1000.0).abs() < 1e-9);
    }
}
