use super::metrics::{LinkId, LinkStats, MetricsRecord};
use super::packet::{NodeSet, Packet};
use super::wimax::{ServerKey, WimaxConfig, WimaxDir, WimaxLink};
use super::wlan::{WlanConfig, WlanLink};
use super::NetError;
use crate::protocol::{fragment_payload, Message, HEADER_LEN};
use crate::{Micros, NodeId};

/// Link-layer events. The owner of the event queue feeds them back through
/// [`Network::handle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetEvent {
    WlanTxDone(NodeId),
    WlanProcDone(NodeId),
    WimaxTxDone(ServerKey),
    WimaxWake(ServerKey),
    Deferred(Box<Delivery>),
}

/// A packet copy handed to a receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub packet: Packet,
    pub receiver: NodeId,
    pub at: Micros,
    pub link: LinkId,
}

/// What one send put on a link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Offered {
    pub fragments: u32,
    pub copies: u32,
    /// Link bits over all fragments and receiver copies, overhead included.
    pub bits: u64,
}

pub struct Network {
    pub wlan: WlanLink,
    pub wimax: WimaxLink,
    pub metrics: MetricsRecord,
    /// Drones that carry a WiMAX adapter; others pay `backup_penalty_us`.
    pub wimax_adapters: NodeSet,
    next_packet: u64,
}

impl Network {
    pub fn new(
        wlan: WlanConfig,
        wimax: WimaxConfig,
        drones: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, NetError> {
        if wlan.mtu as usize <= HEADER_LEN || wimax.mtu as usize <= HEADER_LEN {
            return Err(NetError::Mtu(wlan.mtu.min(wimax.mtu)));
        }
        if wlan.mtu != wimax.mtu {
            return Err(NetError::MtuMismatch {
                wlan: wlan.mtu,
                wimax: wimax.mtu,
            });
        }
        let mut metrics = MetricsRecord::default();
        metrics.link_mut(LinkId::Wlan);
        metrics.link_mut(LinkId::Wimax);
        Ok(Self {
            wlan: WlanLink::new(wlan, drones),
            wimax: WimaxLink::new(wimax),
            metrics,
            wimax_adapters: NodeSet::single(NodeId(0)),
            next_packet: 0,
        })
    }

    fn packets(&mut self, now: Micros, msg: Message, hop_src: NodeId, receivers: NodeSet, flow: u32) -> Vec<Packet> {
        let mut frags = fragment_payload(msg.payload_len, self.wlan.cfg.mtu).expect("mtu checked at construction");
        if frags.is_empty() {
            frags.push(0);
        }
        let count = frags.len() as u16;
        let class = msg.kind.access_class();
        frags
            .into_iter()
            .enumerate()
            .map(|(i, len)| {
                self.next_packet += 1;
                Packet {
                    id: self.next_packet,
                    msg,
                    frag_index: i as u16,
                    frag_count: count,
                    wire_bytes: HEADER_LEN as u32 + len,
                    class,
                    service_flow: flow,
                    hop_src,
                    receivers,
                    hop_start: now,
                }
            })
            .collect()
    }

    /// Fragments `msg` and queues it at `hop_src`'s WLAN interface. `flow`
    /// is the WiMAX service flow used if the leader relays it onward.
    pub fn send_wlan(
        &mut self,
        now: Micros,
        msg: Message,
        hop_src: NodeId,
        receivers: NodeSet,
        flow: u32,
        sched: &mut Vec<(Micros, NetEvent)>,
    ) -> Offered {
        let pkts = self.packets(now, msg, hop_src, receivers, flow);
        let mut out = Offered::default();
        for p in pkts {
            let o = self.forward_wlan(now, p, hop_src, receivers, sched);
            out.fragments += 1;
            out.copies += o.copies;
            out.bits += o.bits;
        }
        out
    }

    /// Relays an already-fragmented packet over the WLAN.
    pub fn forward_wlan(
        &mut self,
        now: Micros,
        mut pkt: Packet,
        hop_src: NodeId,
        mut receivers: NodeSet,
        sched: &mut Vec<(Micros, NetEvent)>,
    ) -> Offered {
        receivers.remove(hop_src);
        pkt.hop_src = hop_src;
        pkt.receivers = receivers;
        pkt.hop_start = now;
        let copies = receivers.len();
        let bits = self.wlan.cfg.frame_bits(pkt.wire_bytes) * copies as u64;
        let stats = self.metrics.link_mut(LinkId::Wlan);
        self.wlan.enqueue(now, pkt, stats, sched);
        Offered {
            fragments: 1,
            copies,
            bits,
        }
    }

    /// Fragments `msg` and queues it on the WiMAX service flow `flow`.
    pub fn send_wimax(
        &mut self,
        now: Micros,
        msg: Message,
        hop_src: NodeId,
        receiver: NodeId,
        flow: u32,
        sched: &mut Vec<(Micros, NetEvent)>,
    ) -> Offered {
        let pkts = self.packets(now, msg, hop_src, NodeSet::single(receiver), flow);
        let mut out = Offered::default();
        for p in pkts {
            let o = self.forward_wimax(now, p, hop_src, receiver, flow, sched);
            out.fragments += 1;
            out.copies += o.copies;
            out.bits += o.bits;
        }
        out
    }

    /// Relays an already-fragmented packet over WiMAX. The direction is
    /// uplink unless `receiver` is a drone.
    pub fn forward_wimax(
        &mut self,
        now: Micros,
        mut pkt: Packet,
        hop_src: NodeId,
        receiver: NodeId,
        flow: u32,
        sched: &mut Vec<(Micros, NetEvent)>,
    ) -> Offered {
        let dir = if receiver.is_drone() {
            WimaxDir::Downlink
        } else {
            WimaxDir::Uplink
        };
        pkt.hop_src = hop_src;
        pkt.receivers = NodeSet::single(receiver);
        pkt.service_flow = flow;
        let bits = self.wimax.cfg.frame_bits(pkt.wire_bytes);
        let key = self.wimax.key(dir, flow);
        let stats = self.metrics.link_mut(LinkId::Wimax);
        if hop_src.is_drone() && !self.wlan.is_attached(hop_src) {
            stats.offer(1, bits);
            stats.drop_copies(1, bits);
        } else {
            self.wimax.enqueue(now, key, pkt, stats, sched);
        }
        Offered {
            fragments: 1,
            copies: 1,
            bits,
        }
    }

    /// Advances the link models by one event. Completed copies are appended
    /// to `delivered`.
    pub fn handle(
        &mut self,
        now: Micros,
        ev: NetEvent,
        sched: &mut Vec<(Micros, NetEvent)>,
        delivered: &mut Vec<Delivery>,
    ) {
        match ev {
            NetEvent::WlanTxDone(node) => {
                let stats = self.metrics.link_mut(LinkId::Wlan);
                self.wlan.on_tx_done(now, node, stats, sched);
            }
            NetEvent::WlanProcDone(node) => {
                if let Some(pkt) = self.wlan.on_proc_done(now, node, sched) {
                    let bits = self.wlan.cfg.frame_bits(pkt.wire_bytes);
                    let stats = self.metrics.link_mut(LinkId::Wlan);
                    stats.deliver(bits, pkt.class, now - pkt.hop_start);
                    delivered.push(Delivery {
                        packet: pkt,
                        receiver: node,
                        at: now,
                        link: LinkId::Wlan,
                    });
                }
            }
            NetEvent::WimaxWake(key) => self.wimax.on_wake(now, key, sched),
            NetEvent::WimaxTxDone(key) => {
                let Some(pkt) = self.wimax.on_tx_done(now, key, sched) else {
                    return;
                };
                let receiver = pkt.receivers.iter().next().unwrap_or(NodeId::DMC);
                let d = Delivery {
                    packet: pkt,
                    receiver,
                    at: now,
                    link: LinkId::Wimax,
                };
                let drone_end = if receiver.is_drone() { receiver } else { d.packet.hop_src };
                let penalty = self.wimax.cfg.backup_penalty_us;
                if penalty > 0 && drone_end.is_drone() && !self.wimax_adapters.contains(drone_end) {
                    sched.push((now + penalty, NetEvent::Deferred(Box::new(d))));
                } else {
                    self.finish_wimax(now, d, delivered);
                }
            }
            NetEvent::Deferred(d) => self.finish_wimax(now, *d, delivered),
        }
    }

    fn finish_wimax(&mut self, now: Micros, mut d: Delivery, delivered: &mut Vec<Delivery>) {
        let bits = self.wimax.cfg.frame_bits(d.packet.wire_bytes);
        let stats = self.metrics.link_mut(LinkId::Wimax);
        if d.receiver.is_drone() && !self.wlan.is_attached(d.receiver) {
            stats.drop_copies(1, bits);
            return;
        }
        stats.deliver(bits, d.packet.class, now - d.packet.hop_start);
        d.at = now;
        delivered.push(d);
    }

    /// Takes a dead or isolated drone off both links.
    pub fn detach(&mut self, node: NodeId) {
        let (wlan_stats, wimax_stats) = split_stats(&mut self.metrics);
        self.wlan.detach(node, wlan_stats);
        self.wimax.purge_sender(node, wimax_stats);
    }

    pub fn is_attached(&self, node: NodeId) -> bool {
        !node.is_drone() || self.wlan.is_attached(node)
    }
}

fn split_stats(m: &mut MetricsRecord) -> (&mut LinkStats, &mut LinkStats) {
    let mut it = m.links.iter_mut();
    let (a_id, a) = it.next().expect("both links registered");
    let (_, b) = it.next().expect("both links registered");
    debug_assert_eq!(*a_id, LinkId::Wlan);
    (a, b)
}
