use super::{Message, MessageKind, PayloadRules, ProtocolError, SeqCounters};
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};

pub const SD_STATUS_PERIOD: Micros = 10_000_000;
/// One leader status every 30 s; the nominal 0.033 pkt/s is read as the
/// 30-second DMC reporting interval.
pub const LD_STATUS_PERIOD: Micros = 30_000_000;
pub const WAYPOINT_PERIOD: Micros = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowEnd {
    Sd,
    Ld,
    Dmc,
    AllSds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRate {
    Periodic(Micros),
    /// One message per delivered message of the given kind, sent back to its source.
    ResponseTo(MessageKind),
    EventDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub kind: MessageKind,
    pub from: FlowEnd,
    pub to: FlowEnd,
    pub rate: FlowRate,
}

impl Flow {
    const fn new(kind: MessageKind, from: FlowEnd, to: FlowEnd, rate: FlowRate) -> Self {
        Self { kind, from, to, rate }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficProfile {
    pub id: u8,
    pub flight_mode: bool,
    pub flows: Vec<Flow>,
}

impl TrafficProfile {
    pub fn from_id(id: u8) -> Result<Self, ProtocolError> {
        use FlowEnd::*;
        use MessageKind::*;
        let mut flows = vec![
            Flow::new(StatusReportSd, Sd, Ld, FlowRate::Periodic(SD_STATUS_PERIOD)),
            Flow::new(StatusReportLd, Ld, Dmc, FlowRate::Periodic(LD_STATUS_PERIOD)),
        ];
        match id {
            1 => {}
            2 => flows.extend([
                Flow::new(Ack, Ld, Sd, FlowRate::ResponseTo(StatusReportSd)),
                Flow::new(Ack, Dmc, Ld, FlowRate::ResponseTo(StatusReportLd)),
                Flow::new(CaseReport, Sd, Dmc, FlowRate::EventDriven),
                Flow::new(Ack, Dmc, Sd, FlowRate::ResponseTo(CaseReport)),
                Flow::new(VideoFrame, Sd, Dmc, FlowRate::EventDriven),
                Flow::new(VideoFrame, Dmc, Sd, FlowRate::EventDriven),
            ]),
            other => return Err(ProtocolError::UnknownProfile(other)),
        }
        Ok(Self {
            id,
            flight_mode: false,
            flows,
        })
    }

    /// Adds the leader's waypoint broadcast and the per-SD acknowledgements
    /// used while the swarm is airborne.
    pub fn with_flight_mode(mut self) -> Self {
        if !self.flight_mode {
            self.flight_mode = true;
            self.flows.extend([
                Flow::new(
                    MessageKind::MoveToWaypoint,
                    FlowEnd::Ld,
                    FlowEnd::AllSds,
                    FlowRate::Periodic(WAYPOINT_PERIOD),
                ),
                Flow::new(
                    MessageKind::Ack,
                    FlowEnd::Sd,
                    FlowEnd::Ld,
                    FlowRate::ResponseTo(MessageKind::MoveToWaypoint),
                ),
            ]);
        }
        self
    }

    /// The response flow triggered by a delivered message of `kind`, if any.
    pub fn response_to(&self, kind: MessageKind) -> Option<&Flow> {
        self.flows
            .iter()
            .find(|f| f.rate == FlowRate::ResponseTo(kind))
    }

    pub fn periodic(&self) -> impl Iterator<Item = (&Flow, Micros)> {
        self.flows.iter().filter_map(|f| match f.rate {
            FlowRate::Periodic(p) => Some((f, p)),
            _ => None,
        })
    }
}

/// How periodic sources are phased against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phasing {
    /// Every source first sends one full period after the window opens.
    #[default]
    Aligned,
    /// Source `i` of `m` is advanced by `i * period / m`, spreading sends
    /// evenly across the period.
    Staggered,
}

/// Offset from the window start to the first send of source `index` out of `count`.
///
/// Always in `(0, period]`, so a closed window of length `T` holds
/// `floor(T / period)` sends per source under aligned phasing and at most one
/// more under staggered phasing.
pub fn first_send_offset(period: Micros, index: usize, count: usize, phasing: Phasing) -> Micros {
    match phasing {
        Phasing::Aligned => period,
        Phasing::Staggered => {
            let count = count.max(1) as u128;
            period - (index as u128 * period as u128 / count) as Micros
        }
    }
}

/// Closed interval `[start, end]` of simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Micros,
    pub end: Micros,
}

impl Window {
    pub fn new(start: Micros, end: Micros) -> Result<Self, ProtocolError> {
        if start >= end {
            return Err(ProtocolError::BadWindow(start, end));
        }
        Ok(Self { start, end })
    }

    pub fn secs(start: f64, end: f64) -> Result<Self, ProtocolError> {
        Self::new(crate::secs_to_micros(start), crate::secs_to_micros(end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendEvent {
    pub at: Micros,
    pub message: Message,
}

fn nodes(end: FlowEnd, n: u32) -> Vec<NodeId> {
    match end {
        FlowEnd::Sd | FlowEnd::AllSds => (1..=n).map(|i| NodeId(i as u8)).collect(),
        FlowEnd::Ld => vec![NodeId(0)],
        FlowEnd::Dmc => vec![NodeId::DMC],
    }
}

fn address(end: FlowEnd) -> NodeId {
    match end {
        FlowEnd::Ld => NodeId(0),
        FlowEnd::Dmc => NodeId::DMC,
        FlowEnd::AllSds => NodeId::BROADCAST,
        // Per-SD destinations are resolved by the caller.
        FlowEnd::Sd => NodeId::BROADCAST,
    }
}

/// Open-loop send schedule of the profile's periodic flows and their
/// immediate responses over `window`, sorted by time.
///
/// Event-driven flows (case reports, video) are not generated here. Leader
/// id is 0 and slave drones are `1..=rules.n_sds`.
pub fn generate_profile_traffic(
    profile: &TrafficProfile,
    rules: &PayloadRules,
    window: Window,
    phasing: Phasing,
) -> Result<Vec<SendEvent>, ProtocolError> {
    let n = rules.n_sds;
    if n == 0 {
        return Err(ProtocolError::EmptySwarm);
    }
    let mut raw: Vec<(Micros, MessageKind, NodeId, NodeId)> = Vec::new();
    for (flow, period) in profile.periodic() {
        let sources = nodes(flow.from, n);
        let count = sources.len();
        for (i, src) in sources.into_iter().enumerate() {
            let mut at = window.start + first_send_offset(period, i, count, phasing);
            while at <= window.end {
                raw.push((at, flow.kind, src, address(flow.to)));
                if let Some(resp) = profile.response_to(flow.kind) {
                    let responders = if flow.to == FlowEnd::AllSds {
                        nodes(FlowEnd::Sd, n)
                    } else {
                        vec![address(flow.to)]
                    };
                    for r in responders {
                        raw.push((at, resp.kind, r, src));
                    }
                }
                at += period;
            }
        }
    }
    raw.sort_by_key(|e| e.0);
    let mut seqs = SeqCounters::default();
    raw.into_iter()
        .map(|(at, kind, src, dst)| {
            let seq = seqs.next(src, kind);
            Ok(SendEvent {
                at,
                message: Message::new(kind, src, dst, rules, seq, at)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(ev: &[SendEvent], kind: MessageKind) -> usize {
        ev.iter().filter(|e| e.message.kind == kind).count()
    }

    #[test]
    fn profile_one_counts() {
        let p = TrafficProfile::from_id(1).unwrap();
        let w = Window::secs(0.0, 60.0).unwrap();
        let ev = generate_profile_traffic(&p, &PayloadRules::new(1), w, Phasing::Aligned).unwrap();
        assert_eq!(count(&ev, MessageKind::StatusReportSd), 6);
        assert_eq!(count(&ev, MessageKind::StatusReportLd), 2);
        assert_eq!(ev.len(), 8);

        let ev = generate_profile_traffic(&p, &PayloadRules::new(10), w, Phasing::Aligned).unwrap();
        assert_eq!(count(&ev, MessageKind::StatusReportSd), 60);
    }

    #[test]
    fn flight_mode_broadcasts_every_200ms() {
        let p = TrafficProfile::from_id(1).unwrap().with_flight_mode();
        let w = Window::secs(0.0, 1.0).unwrap();
        let ev = generate_profile_traffic(&p, &PayloadRules::new(3), w, Phasing::Aligned).unwrap();
        let bcast: Vec<_> = ev
            .iter()
            .filter(|e| e.message.kind == MessageKind::MoveToWaypoint)
            .map(|e| e.at)
            .collect();
        assert_eq!(bcast, vec![200_000, 400_000, 600_000, 800_000, 1_000_000]);
        assert_eq!(count(&ev, MessageKind::Ack), 15);
        assert!(ev.iter().all(|e| e.message.kind != MessageKind::MoveToWaypoint
            || e.message.dst == NodeId::BROADCAST));
    }

    #[test]
    fn profile_two_acks_match_status() {
        let p = TrafficProfile::from_id(2).unwrap();
        let w = Window::secs(0.0, 90.0).unwrap();
        let ev = generate_profile_traffic(&p, &PayloadRules::new(4), w, Phasing::Aligned).unwrap();
        let sd_acks = ev
            .iter()
            .filter(|e| e.message.kind == MessageKind::Ack && e.message.src == NodeId(0))
            .count();
        assert_eq!(sd_acks, count(&ev, MessageKind::StatusReportSd));
        let dmc_acks = ev
            .iter()
            .filter(|e| e.message.kind == MessageKind::Ack && e.message.src == NodeId::DMC)
            .count();
        assert_eq!(dmc_acks, 3);
    }

    #[test]
    fn unknown_profile_and_bad_window() {
        assert_eq!(TrafficProfile::from_id(3), Err(ProtocolError::UnknownProfile(3)));
        assert!(Window::new(5, 5).is_err());
    }

    #[test]
    fn stagger_offsets_stay_in_period() {
        for m in 1..50 {
            for i in 0..m {
                let off = first_send_offset(SD_STATUS_PERIOD, i, m, Phasing::Staggered);
                assert!(off > 0 && off <= SD_STATUS_PERIOD);
            }
        }
    }

    #[test]
    fn sorted_and_sequenced() {
        let p = TrafficProfile::from_id(2).unwrap().with_flight_mode();
        let w = Window::secs(3.0, 40.0).unwrap();
        let ev = generate_profile_traffic(&p, &PayloadRules::new(5), w, Phasing::Staggered).unwrap();
        assert!(ev.windows(2).all(|p| p[0].at <= p[1].at));
        let mut last = std::collections::BTreeMap::new();
        for e in &ev {
            let key = (e.message.src, e.message.kind);
            if let Some(prev) = last.insert(key, e.message.seq) {
                assert!(e.message.seq > prev);
            }
        }
    }
}
