//! Single-link replays of explicit packet traces, for checking the link
//! models in isolation.

use super::event::EventQueue;
use super::metrics::LinkStats;
use super::network::NetEvent;
use super::packet::{NodeSet, Packet};
use super::wimax::{WimaxConfig, WimaxDir, WimaxLink};
use super::wlan::{WlanConfig, WlanLink};
use crate::protocol::{AccessClass, Message, MessageKind};
use crate::{Micros, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceArrival {
    pub at: Micros,
    pub wire_bytes: u32,
    pub kind: MessageKind,
}

/// Per-arrival outcome: `Some(latency)` if delivered, `None` if dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceResult {
    pub latencies: Vec<Option<Micros>>,
    pub stats: LinkStats,
}

enum Ev {
    Arrive(usize),
    Net(NetEvent),
}

fn packet(i: usize, a: &TraceArrival, src: NodeId, dst: NodeId) -> Packet {
    Packet {
        id: i as u64,
        msg: Message {
            kind: a.kind,
            src,
            dst,
            payload_len: a.wire_bytes.saturating_sub(crate::protocol::HEADER_LEN as u32),
            seq: i as u32,
            created_at: a.at,
        },
        frag_index: 0,
        frag_count: 1,
        wire_bytes: a.wire_bytes,
        class: a.kind.access_class(),
        service_flow: 0,
        hop_src: src,
        receivers: NodeSet::single(dst),
        hop_start: a.at,
    }
}

fn replay<F>(trace: &[TraceArrival], mut step: F) -> Vec<Option<Micros>>
where
    F: FnMut(Micros, Ev, &mut Vec<(Micros, NetEvent)>) -> Option<Packet>,
{
    let mut q = EventQueue::new();
    for (i, a) in trace.iter().enumerate() {
        q.schedule(a.at, Ev::Arrive(i)).expect("queue starts at 0");
    }
    let mut out = vec![None; trace.len()];
    let mut sched = Vec::new();
    while let Some((now, ev)) = q.pop() {
        if let Some(p) = step(now, ev, &mut sched) {
            out[p.id as usize] = Some(now - trace[p.id as usize].at);
        }
        for (at, e) in sched.drain(..) {
            q.schedule(at, Ev::Net(e)).expect("links never schedule into the past");
        }
    }
    out
}

/// Sends every arrival from one drone to another over a WLAN link.
pub fn simulate_wlan_trace(cfg: &WlanConfig, trace: &[TraceArrival]) -> TraceResult {
    let (src, dst) = (NodeId(1), NodeId(0));
    let mut link = WlanLink::new(*cfg, [dst, src]);
    let mut stats = LinkStats::default();
    let latencies = replay(trace, |now, ev, sched| match ev {
        Ev::Arrive(i) => {
            link.enqueue(now, packet(i, &trace[i], src, dst), &mut stats, sched);
            None
        }
        Ev::Net(NetEvent::WlanTxDone(n)) => {
            link.on_tx_done(now, n, &mut stats, sched);
            None
        }
        Ev::Net(NetEvent::WlanProcDone(n)) => {
            let p = link.on_proc_done(now, n, sched)?;
            stats.deliver(cfg.frame_bits(p.wire_bytes), p.class, now - p.hop_start);
            Some(p)
        }
        Ev::Net(_) => None,
    });
    TraceResult { latencies, stats }
}

/// Sends every arrival uplink over one WiMAX service flow.
pub fn simulate_wimax_trace(cfg: &WimaxConfig, trace: &[TraceArrival]) -> TraceResult {
    let mut link = WimaxLink::new(*cfg);
    let key = link.key(WimaxDir::Uplink, 0);
    let mut stats = LinkStats::default();
    let latencies = replay(trace, |now, ev, sched| match ev {
        Ev::Arrive(i) => {
            link.enqueue(now, key, packet(i, &trace[i], NodeId(0), NodeId::DMC), &mut stats, sched);
            None
        }
        Ev::Net(NetEvent::WimaxWake(k)) => {
            link.on_wake(now, k, sched);
            None
        }
        Ev::Net(NetEvent::WimaxTxDone(k)) => {
            let p = link.on_tx_done(now, k, sched)?;
            stats.deliver(cfg.frame_bits(p.wire_bytes), p.class, now - p.hop_start);
            Some(p)
        }
        Ev::Net(_) => None,
    });
    TraceResult { latencies, stats }
}

/// Position at which the packet of class `probe` would be served if it
/// arrived behind `ahead`, all queued at an idle WLAN interface.
pub fn service_position(cfg: &WlanConfig, ahead: &[AccessClass], probe: AccessClass) -> usize {
    let kind_of = |c: AccessClass| match c {
        AccessClass::Control => MessageKind::Ack,
        AccessClass::Video => MessageKind::VideoFrame,
        AccessClass::BestEffort => MessageKind::StatusReportSd,
    };
    // A blocker occupies the interface so everything else queues behind it.
    let mut trace = vec![TraceArrival {
        at: 0,
        wire_bytes: 1500,
        kind: MessageKind::VideoFrame,
    }];
    trace.extend(ahead.iter().map(|&c| TraceArrival {
        at: 0,
        wire_bytes: 1500,
        kind: kind_of(c),
    }));
    trace.push(TraceArrival {
        at: 0,
        wire_bytes: 10,
        kind: kind_of(probe),
    });
    let mut link = WlanLink::new(*cfg, [NodeId(0), NodeId(1)]);
    let mut stats = LinkStats::default();
    let mut order = Vec::new();
    let mut q = EventQueue::new();
    let mut sched = Vec::new();
    for (i, a) in trace.iter().enumerate() {
        link.enqueue(0, packet(i, a, NodeId(1), NodeId(0)), &mut stats, &mut sched);
    }
    loop {
        for (at, e) in sched.drain(..) {
            q.schedule(at, e).expect("future");
        }
        let Some((now, ev)) = q.pop() else { break };
        match ev {
            NetEvent::WlanTxDone(n) => link.on_tx_done(now, n, &mut stats, &mut sched),
            NetEvent::WlanProcDone(n) => {
                if let Some(p) = link.on_proc_done(now, n, &mut sched) {
                    order.push(p.id as usize);
                }
            }
            _ => {}
        }
    }
    // Position among the packets queued behind the blocker, 1-based.
    order.iter().skip(1).position(|&id| id == trace.len() - 1).map_or(0, |p| p + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::wlan;

    fn one(at: Micros, wire_bytes: u32, kind: MessageKind) -> TraceArrival {
        TraceArrival { at, wire_bytes, kind }
    }

    #[test]
    fn empty_wlan_latency() {
        let cfg = WlanConfig {
            overhead_bytes: wlan::HEADER_STACK_OVERHEAD_BYTES,
            ..WlanConfig::default()
        };
        let r = simulate_wlan_trace(&cfg, &[one(0, 21, MessageKind::StatusReportSd)]);
        assert_eq!(r.latencies, vec![Some(117)]);
        let slow = WlanConfig { data_rate_bps: 6_000_000, ..cfg };
        let r = simulate_wlan_trace(&slow, &[one(0, 21, MessageKind::StatusReportSd)]);
        assert_eq!(r.latencies, vec![Some(248)]);
    }

    #[test]
    fn full_buffer_drops() {
        let cfg = WlanConfig {
            buffer_bits: 30_000,
            ..WlanConfig::default()
        };
        let trace: Vec<_> = (0..3).map(|_| one(0, 1500, MessageKind::VideoFrame)).collect();
        let r = simulate_wlan_trace(&cfg, &trace);
        assert_eq!(r.latencies.iter().filter(|l| l.is_none()).count(), 1);
        assert!(r.stats.is_conserved());
    }

    #[test]
    fn edca_strict_priority() {
        let video = [AccessClass::Video; 10];
        let on = WlanConfig { edca: true, ..WlanConfig::default() };
        let off = WlanConfig::default();
        assert_eq!(service_position(&on, &video, AccessClass::Control), 1);
        assert_eq!(service_position(&off, &video, AccessClass::Control), 11);
    }

    #[test]
    fn edca_no_effect_when_idle() {
        let on = WlanConfig { edca: true, ..WlanConfig::default() };
        let t = [one(0, 10, MessageKind::Ack)];
        assert_eq!(simulate_wlan_trace(&on, &t).latencies, simulate_wlan_trace(&WlanConfig::default(), &t).latencies);
    }

    #[test]
    fn wimax_empty_link() {
        let r = simulate_wimax_trace(&WimaxConfig::default(), &[one(0, 1500, MessageKind::VideoFrame)]);
        assert_eq!(r.latencies, vec![Some(1244)]);
    }

    #[test]
    fn wimax_shapes_overload() {
        // 12 Mbit/s of 1554-byte frames for 5 s.
        let gap = wlan::tx_time(1554 * 8, 12_000_000);
        let n = (5_000_000 / gap) as usize;
        let trace: Vec<_> = (0..n).map(|i| one(i as u64 * gap, 1500, MessageKind::VideoFrame)).collect();
        let r = simulate_wimax_trace(&WimaxConfig::default(), &trace);
        let last = trace.last().unwrap().at + 200_000;
        let rate = r.stats.delivered_bits as f64 / crate::micros_to_secs(last);
        assert!(rate <= 10_000_000.0 * 1.001, "{rate}");
        assert!(r.stats.dropped_packets > 0);
        assert!(r.stats.is_conserved());
    }
}
