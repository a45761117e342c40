use crate::protocol::AccessClass;
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkId {
    Wlan,
    Wimax,
}

impl LinkId {
    pub fn name(self) -> &'static str {
        match self {
            LinkId::Wlan => "wlan",
            LinkId::Wimax => "wimax",
        }
    }
}

/// What the swarm was doing when traffic was offered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    Ground,
    Flight,
    Collection,
}

impl TrafficMode {
    pub fn name(self) -> &'static str {
        match self {
            TrafficMode::Ground => "ground",
            TrafficMode::Flight => "flight",
            TrafficMode::Collection => "collection",
        }
    }
}

/// Role-level traffic direction, as tabulated for the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDir {
    SdToLd,
    LdToSd,
    LdToDmc,
    DmcToLd,
}

impl FlowDir {
    pub const ALL: [FlowDir; 4] = [FlowDir::SdToLd, FlowDir::LdToSd, FlowDir::LdToDmc, FlowDir::DmcToLd];

    pub fn name(self) -> &'static str {
        match self {
            FlowDir::SdToLd => "sd_ld",
            FlowDir::LdToSd => "ld_sd",
            FlowDir::LdToDmc => "ld_dmc",
            FlowDir::DmcToLd => "dmc_ld",
        }
    }
}

/// Latency samples in microseconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Samples(pub Vec<Micros>);

impl Samples {
    pub fn push(&mut self, v: Micros) {
        self.0.push(v);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sort(&mut self) {
        self.0.sort_unstable();
    }

    pub fn mean(&self) -> Option<f64> {
        if self.0.is_empty() {
            return None;
        }
        Some(self.0.iter().map(|&v| v as f64).sum::<f64>() / self.0.len() as f64)
    }

    /// Nearest-rank percentile.
    pub fn percentile(&self, p: f64) -> Option<Micros> {
        if self.0.is_empty() {
            return None;
        }
        let mut v = self.0.clone();
        v.sort_unstable();
        Some(nearest_rank(&v, p))
    }

    pub fn extend(&mut self, other: &Samples) {
        self.0.extend_from_slice(&other.0);
    }
}

pub(crate) fn nearest_rank(sorted: &[Micros], p: f64) -> Micros {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencySummary {
    pub count: usize,
    pub mean: f64,
    pub p50: Micros,
    pub p95: Micros,
    pub p99: Micros,
    pub max: Micros,
}

impl LatencySummary {
    pub fn of<'a>(samples: impl IntoIterator<Item = &'a Samples>) -> Option<Self> {
        let mut v: Vec<Micros> = samples.into_iter().flat_map(|s| s.0.iter().copied()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        Some(Self {
            count: v.len(),
            mean: v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64,
            p50: nearest_rank(&v, 50.0),
            p95: nearest_rank(&v, 95.0),
            p99: nearest_rank(&v, 99.0),
            max: *v.last().unwrap(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub offered_packets: u64,
    pub delivered_packets: u64,
    pub dropped_packets: u64,
    pub offered_bits: u64,
    pub delivered_bits: u64,
    pub dropped_bits: u64,
    pub latency: BTreeMap<AccessClass, Samples>,
}

impl LinkStats {
    pub fn offer(&mut self, copies: u64, bits: u64) {
        self.offered_packets += copies;
        self.offered_bits += copies * bits;
    }

    pub fn drop_copies(&mut self, copies: u64, bits: u64) {
        self.dropped_packets += copies;
        self.dropped_bits += copies * bits;
    }

    pub fn deliver(&mut self, bits: u64, class: AccessClass, latency: Micros) {
        self.delivered_packets += 1;
        self.delivered_bits += bits;
        self.latency.entry(class).or_default().push(latency);
    }

    pub fn in_flight_packets(&self) -> u64 {
        self.offered_packets - self.delivered_packets - self.dropped_packets
    }

    pub fn is_conserved(&self) -> bool {
        self.offered_packets == self.delivered_packets + self.dropped_packets
            && self.offered_bits == self.delivered_bits + self.dropped_bits
    }

    pub fn loss_ratio(&self) -> f64 {
        if self.offered_packets == 0 {
            0.0
        } else {
            self.dropped_packets as f64 / self.offered_packets as f64
        }
    }

    pub fn latency_summary(&self, class: Option<AccessClass>) -> Option<LatencySummary> {
        match class {
            Some(c) => LatencySummary::of(self.latency.get(&c)),
            None => LatencySummary::of(self.latency.values()),
        }
    }

    fn merge(&mut self, other: &LinkStats) {
        self.offered_packets += other.offered_packets;
        self.delivered_packets += other.delivered_packets;
        self.dropped_packets += other.dropped_packets;
        self.offered_bits += other.offered_bits;
        self.delivered_bits += other.delivered_bits;
        self.dropped_bits += other.dropped_bits;
        for (c, s) in &other.latency {
            self.latency.entry(*c).or_default().extend(s);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlowStats {
    pub packets: u64,
    pub bits: u64,
}

/// Everything measured during one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub links: BTreeMap<LinkId, LinkStats>,
    /// Creation-to-delivery latency at the final destination, per class.
    pub e2e_latency: BTreeMap<AccessClass, Samples>,
    /// Offered link bits (overhead included) per role direction and mode.
    pub flows: BTreeMap<(TrafficMode, FlowDir), FlowStats>,
    /// Offered uplink bits per slave drone and mode.
    pub sd_uplink_bits: BTreeMap<(TrafficMode, NodeId), u64>,
    pub mode_time: BTreeMap<TrafficMode, Micros>,
    pub recovery_times: Vec<Micros>,
    pub counters: BTreeMap<String, u64>,
    pub elapsed: Micros,
}

impl MetricsRecord {
    pub fn link(&self, id: LinkId) -> LinkStats {
        self.links.get(&id).cloned().unwrap_or_default()
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut LinkStats {
        self.links.entry(id).or_default()
    }

    pub fn bump(&mut self, counter: &str, by: u64) {
        *self.counters.entry(counter.to_string()).or_default() += by;
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.counters.get(name).copied().unwrap_or(0)
    }

    pub fn flow_bps(&self, mode: TrafficMode, dir: FlowDir) -> f64 {
        let secs = crate::micros_to_secs(self.mode_time.get(&mode).copied().unwrap_or(0));
        if secs == 0.0 {
            return 0.0;
        }
        self.flows.get(&(mode, dir)).map_or(0.0, |f| f.bits as f64 / secs)
    }

    pub fn conserved(&self) -> bool {
        self.links.values().all(LinkStats::is_conserved)
    }

    /// Sorts all sample vectors so that records compare by content.
    pub fn normalize(&mut self) {
        for l in self.links.values_mut() {
            l.latency.values_mut().for_each(Samples::sort);
        }
        self.e2e_latency.values_mut().for_each(Samples::sort);
        self.recovery_times.sort_unstable();
    }

    /// Combines two records. Counts add, samples pool; the result is
    /// normalized so merging is commutative and associative.
    pub fn merge(&self, other: &MetricsRecord) -> MetricsRecord {
        let mut out = self.clone();
        for (id, l) in &other.links {
            out.links.entry(*id).or_default().merge(l);
        }
        for (c, s) in &other.e2e_latency {
            out.e2e_latency.entry(*c).or_default().extend(s);
        }
        for (k, f) in &other.flows {
            let e = out.flows.entry(*k).or_default();
            e.packets += f.packets;
            e.bits += f.bits;
        }
        for (k, b) in &other.sd_uplink_bits {
            *out.sd_uplink_bits.entry(*k).or_default() += b;
        }
        for (k, t) in &other.mode_time {
            *out.mode_time.entry(*k).or_default() += t;
        }
        out.recovery_times.extend_from_slice(&other.recovery_times);
        for (k, v) in &other.counters {
            *out.counters.entry(k.clone()).or_default() += v;
        }
        out.elapsed += other.elapsed;
        out.normalize();
        out
    }
}
