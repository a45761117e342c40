use super::config::{ConfigError, ScenarioConfig, StartPhase};
use crate::energy::{derate_flight_time, payload_ratio, EnergyLedger, PhaseEnergy, PowerRole};
use crate::failure::{
    detect_ld_loss, fail_drone, hard_handover, isolate_drone, predict_failure, reallocate_tasks,
    soft_handover, DetectionMode, FailureError, FailureKind, HandoverRecord, LeaderWatch, RangeModel,
    ReallocOutcome,
};
use crate::netsim::wimax::{FLOW_BE, FLOW_RT, FLOW_VIDEO_BASE};
use crate::netsim::{
    call_capacity, CallCapacity, Delivery, EventQueue, FlowDir, LinkId, MetricsRecord, NetEvent, Network,
    NodeSet, Offered, Packet, TrafficMode,
};
use crate::protocol::{
    first_send_offset, Message, MessageKind, PayloadRules, VideoCallSpec, LD_STATUS_PERIOD,
    SD_STATUS_PERIOD, WAYPOINT_PERIOD,
};
use crate::swarm::{
    assign_targets, classify_case, formation_positions, init_swarm, CaseClass, Formation, PhaseEvent,
    PhaseState, Pos, Role, SwarmState, TargetId,
};
use crate::{micros_to_secs, secs_to_micros, Micros, NodeId, MICROS_PER_SEC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub sd: NodeId,
    pub start: Micros,
    pub end: Option<Micros>,
    pub forced: bool,
    pub frames_up: u64,
    pub frames_down: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run_id: String,
    pub seed: u64,
    /// The exact config that produced this result; replaying it reproduces the run.
    pub config: ScenarioConfig,
    pub metrics: MetricsRecord,
    pub energy: BTreeMap<NodeId, EnergyLedger>,
    pub phase_traces: BTreeMap<NodeId, Vec<PhaseState>>,
    pub handovers: Vec<HandoverRecord>,
    pub calls: Vec<CallRecord>,
    pub capacity: Option<CallCapacity>,
    pub max_calls: u32,
    pub planned_targets: Vec<TargetId>,
    pub collected_targets: Vec<TargetId>,
    pub deviations: Vec<String>,
    pub aborted: bool,
    pub mission_complete: bool,
    pub events: u64,
}

impl RunResult {
    pub fn calls_admitted(&self) -> usize {
        self.calls.len()
    }
}

#[derive(Debug)]
enum Ev {
    Net(NetEvent),
    Tick,
    SdStatus(NodeId),
    LdStatus,
    Waypoint,
    Classify { sd: NodeId, session: u32 },
    CallStart { sd: NodeId, forced: bool },
    Frame { call: usize, uplink: bool, k: u64 },
    Failure(usize),
    WatchCheck,
    PredictCheck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Launch { until: Micros },
    Formation,
    Transit,
    Deploy,
    Session { index: u32, start: Micros, end: Micros },
    Report { index: u32, until: Micros },
    Return,
    Done,
}

struct Call {
    rec: CallRecord,
    spec: VideoCallSpec,
    flow: u32,
    open_dirs: u8,
}

const TICK: Micros = MICROS_PER_SEC;

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    rng: ChaCha8Rng,
    q: EventQueue<Ev>,
    net: Network,
    swarm: SwarmState,
    rules: PayloadRules,
    profile2: bool,
    call_spec: Option<VideoCallSpec>,
    max_calls: u32,
    active_calls: u32,
    calls: Vec<Call>,
    stop_at: Micros,
    stage: Stage,
    sessions_started: u32,
    mode: TrafficMode,
    last_tick: Micros,
    heading: f64,
    origin_sd: Vec<bool>,
    former_leaders: NodeSet,
    solo: NodeSet,
    watch: LeaderWatch,
    ld_failed_at: Option<Micros>,
    soft_blocked: bool,
    reassembly: BTreeMap<(NodeId, MessageKind, u32, NodeId), u16>,
    ledgers: Vec<EnergyLedger>,
    budget_min: [f64; 2],
    range: RangeModel,
    noise: Option<Normal<f64>>,
    handovers: Vec<HandoverRecord>,
    collected: Vec<TargetId>,
    deviations: Vec<String>,
    aborted: bool,
    mission_complete: bool,
    sched: Vec<(Micros, NetEvent)>,
}

/// Runs one scenario to completion. Mission aborts are reported in the
/// result, not as errors.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg)?;
    sim.setup()?;
    while let Some((now, ev)) = sim.q.pop() {
        sim.dispatch(now, ev);
    }
    Ok(sim.finish())
}

fn hw_index(id: NodeId) -> usize {
    usize::from(id.0 != 0)
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self, RunError> {
        let n = cfg.n_sds as usize;
        let plan = cfg.mission_plan();
        let swarm = init_swarm(plan, n, cfg.backup_id()).map_err(|e| RunError::Setup(e.to_string()))?;
        let wlan = cfg.wlan.to_link();
        let wimax = cfg.wimax.to_link();
        let net = Network::new(wlan, wimax, (0..=n as u8).map(NodeId)).map_err(|e| RunError::Setup(e.to_string()))?;

        let mut rules = PayloadRules::new(cfg.n_sds);
        rules.ld_status = cfg.payload.ld_status;
        rules.waypoint_len = cfg.payload.waypoint_bytes;
        let (call_spec, capacity) = if cfg.video.enabled {
            let spec = cfg.video.call_spec()?;
            rules = rules.with_video(&spec);
            (Some(spec), Some(call_capacity(&wlan, &wimax, &spec)))
        } else {
            (None, None)
        };
        let max_calls = match (cfg.video.max_calls, capacity) {
            (Some(m), _) => m,
            (None, Some(c)) => c.max_calls,
            (None, None) => 0,
        };

        let e = &cfg.energy;
        let mut budget_min = [0.0; 2];
        for (i, role) in [PowerRole::Ld, PowerRole::Sd].into_iter().enumerate() {
            let pct = payload_ratio(e.manifest.total_g(role), e.spec.base_weight_g)
                .map_err(|err| RunError::Setup(err.to_string()))?;
            budget_min[i] = derate_flight_time(e.spec.base_flight_time_min, pct, &e.curve);
        }
        let range = RangeModel {
            flight_budget_min: budget_min[0],
            speed_mps: swarm.plan.speed_mps(),
        };
        let noise = (cfg.mission.position_noise_m > 0.0)
            .then(|| Normal::new(0.0, cfg.mission.position_noise_m).expect("sigma validated"));
        let mut origin_sd = vec![true; n + 1];
        origin_sd[0] = false;

        let mut sim = Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            q: EventQueue::new(),
            net,
            swarm,
            rules,
            profile2: cfg.traffic_profile == 2,
            call_spec,
            max_calls,
            active_calls: 0,
            calls: Vec::new(),
            stop_at: cfg.horizon(),
            stage: Stage::Launch { until: 0 },
            sessions_started: 0,
            mode: TrafficMode::Ground,
            last_tick: 0,
            heading: 0.0,
            origin_sd,
            former_leaders: NodeSet::default(),
            solo: NodeSet::default(),
            watch: LeaderWatch {
                monitor: cfg.backup_id(),
                mode: None,
                last_heard: 0,
            },
            ld_failed_at: None,
            soft_blocked: false,
            reassembly: BTreeMap::new(),
            ledgers: vec![EnergyLedger::default(); n + 1],
            budget_min,
            range,
            noise,
            handovers: Vec::new(),
            collected: Vec::new(),
            deviations: Vec::new(),
            aborted: false,
            mission_complete: false,
            sched: Vec::new(),
        };
        if let Some(c) = capacity {
            if c.wimax_aggregate_bound < c.wlan_bound {
                sim.deviations.push(format!(
                    "capacity: WLAN admits {} calls, a shared WiMAX uplink would admit only {}; per-service-flow QoS applied",
                    c.wlan_bound, c.wimax_aggregate_bound
                ));
            }
        }
        Ok(sim)
    }

    fn setup(&mut self) -> Result<(), RunError> {
        let n = self.cfg.n_sds as usize;
        self.swarm.pending_targets = (0..self.cfg.n_targets()).collect();
        match self.cfg.mission.start_phase {
            StartPhase::Preflight => {}
            StartPhase::Collecting => self.start_in_field().map_err(|e| RunError::Setup(e.to_string()))?,
        }
        self.q.schedule_in(0, Ev::Tick);
        for i in 0..n {
            let at = first_send_offset(SD_STATUS_PERIOD, i, n, self.cfg.phasing);
            self.q.schedule_in(at, Ev::SdStatus(NodeId(i as u8 + 1)));
        }
        self.q.schedule_in(first_send_offset(LD_STATUS_PERIOD, 0, 1, self.cfg.phasing), Ev::LdStatus);
        self.q.schedule_in(WAYPOINT_PERIOD, Ev::Waypoint);
        for (i, f) in self.cfg.failures.iter().enumerate() {
            self.q.schedule_in(secs_to_micros(f.at_s), Ev::Failure(i));
        }
        if let Some(spec) = self.call_spec {
            let forced = self.cfg.video.forced_calls as u64;
            let start = secs_to_micros(self.cfg.video.start_s);
            let interval = MICROS_PER_SEC / spec.frame_rate as u64;
            for i in 0..forced {
                let sd = NodeId((i % n as u64) as u8 + 1);
                self.q.schedule_in(start + i * interval / forced, Ev::CallStart { sd, forced: true });
            }
        }
        Ok(())
    }

    fn start_in_field(&mut self) -> Result<(), crate::swarm::SwarmError> {
        let center = self.cfg.mission.area_center();
        for d in self.swarm.drones.iter_mut() {
            for ev in [
                PhaseEvent::LaunchCommand,
                PhaseEvent::AltitudeReached,
                PhaseEvent::FormationAchieved,
                PhaseEvent::TargetAreaReached,
            ] {
                d.apply(ev)?;
            }
        }
        self.swarm.drones[0].position = center;
        self.begin_deploy(0);
        for d in self.swarm.drones.iter_mut() {
            if let Some(wp) = d.waypoint {
                d.position = wp;
            }
            d.apply(PhaseEvent::TargetReached)?;
        }
        self.begin_session(0);
        self.mode = self.traffic_mode();
        Ok(())
    }

    fn finish(mut self) -> RunResult {
        let mut metrics = std::mem::take(&mut self.net.metrics);
        metrics.elapsed = self.stop_at;
        metrics.normalize();
        let n_active = self.calls.iter().filter(|c| c.rec.end.is_none()).count();
        if n_active > 0 {
            self.deviations.push(format!("{n_active} calls still open at the horizon"));
        }
        if !self.swarm.pending_targets.is_empty() && !self.aborted {
            self.deviations.push(format!(
                "{} targets never assigned: {:?}",
                self.swarm.pending_targets.len(),
                self.swarm.pending_targets
            ));
        }
        let mut collected = self.collected;
        collected.sort_unstable();
        let cfg = self.cfg.clone();
        RunResult {
            run_id: format!("{}-s{}", cfg.name, cfg.seed),
            seed: cfg.seed,
            metrics,
            energy: self
                .ledgers
                .into_iter()
                .enumerate()
                .map(|(i, l)| (NodeId(i as u8), l))
                .collect(),
            phase_traces: self.swarm.drones.iter().map(|d| (d.id, d.trace.clone())).collect(),
            handovers: self.handovers,
            calls: self.calls.into_iter().map(|c| c.rec).collect(),
            capacity: self.call_spec.map(|s| call_capacity(&cfg.wlan.to_link(), &cfg.wimax.to_link(), &s)),
            max_calls: self.max_calls,
            planned_targets: (0..cfg.n_targets()).collect(),
            collected_targets: collected,
            deviations: self.deviations,
            aborted: self.aborted,
            mission_complete: self.mission_complete,
            events: self.q.processed(),
            config: cfg,
        }
    }

    fn can_send(&self, now: Micros) -> bool {
        now <= self.stop_at && !self.aborted
    }

    fn dispatch(&mut self, now: Micros, ev: Ev) {
        match ev {
            Ev::Net(ev) => self.on_net(now, ev),
            Ev::Tick => self.on_tick(now),
            Ev::SdStatus(id) => self.on_sd_status(now, id),
            Ev::LdStatus => self.on_ld_status(now),
            Ev::Waypoint => self.on_waypoint(now),
            Ev::Classify { sd, session } => self.on_classify(now, sd, session),
            Ev::CallStart { sd, forced } => self.start_call(now, sd, forced),
            Ev::Frame { call, uplink, k } => self.on_frame(now, call, uplink, k),
            Ev::Failure(i) => self.on_failure(now, i),
            Ev::WatchCheck => self.on_watch_check(now),
            Ev::PredictCheck => self.check_prediction(now),
        }
    }

    // ---- network plumbing ----

    fn flush(&mut self) {
        for (at, ev) in self.sched.drain(..) {
            self.q.schedule(at, Ev::Net(ev)).expect("link events are never in the past");
        }
    }

    fn account(&mut self, dir: FlowDir, hop_src: NodeId, off: Offered) {
        let m = &mut self.net.metrics;
        let f = m.flows.entry((self.mode, dir)).or_default();
        f.packets += off.copies as u64;
        f.bits += off.bits;
        if dir == FlowDir::SdToLd {
            *m.sd_uplink_bits.entry((self.mode, hop_src)).or_default() += off.bits;
        }
    }

    fn wlan_dir(&self, hop_src: NodeId) -> FlowDir {
        if self.swarm.leader == Some(hop_src) {
            FlowDir::LdToSd
        } else {
            FlowDir::SdToLd
        }
    }

    fn wlan_send(&mut self, now: Micros, msg: Message, hop_src: NodeId, receivers: NodeSet, flow: u32) {
        let mut sched = std::mem::take(&mut self.sched);
        let off = self.net.send_wlan(now, msg, hop_src, receivers, flow, &mut sched);
        self.sched = sched;
        self.account(self.wlan_dir(hop_src), hop_src, off);
        self.flush();
    }

    fn wlan_forward(&mut self, now: Micros, pkt: Packet, hop_src: NodeId, to: NodeId) {
        let mut sched = std::mem::take(&mut self.sched);
        let off = self.net.forward_wlan(now, pkt, hop_src, NodeSet::single(to), &mut sched);
        self.sched = sched;
        self.account(self.wlan_dir(hop_src), hop_src, off);
        self.flush();
    }

    fn wimax_send(&mut self, now: Micros, msg: Message, hop_src: NodeId, receiver: NodeId, flow: u32) {
        let mut sched = std::mem::take(&mut self.sched);
        let off = self.net.send_wimax(now, msg, hop_src, receiver, flow, &mut sched);
        self.sched = sched;
        let dir = if receiver.is_drone() { FlowDir::DmcToLd } else { FlowDir::LdToDmc };
        self.account(dir, hop_src, off);
        self.flush();
    }

    fn wimax_forward(&mut self, now: Micros, pkt: Packet, hop_src: NodeId, receiver: NodeId) {
        let flow = pkt.service_flow;
        let mut sched = std::mem::take(&mut self.sched);
        let off = self.net.forward_wimax(now, pkt, hop_src, receiver, flow, &mut sched);
        self.sched = sched;
        let dir = if receiver.is_drone() { FlowDir::DmcToLd } else { FlowDir::LdToDmc };
        self.account(dir, hop_src, off);
        self.flush();
    }

    fn message(&mut self, kind: MessageKind, src: NodeId, dst: NodeId, now: Micros) -> Message {
        let seq = self.swarm.seq.next(src, kind);
        Message::new(kind, src, dst, &self.rules, seq, now).expect("payload rules cover every kind in use")
    }

    /// Sends toward the DMC through the acting leader.
    fn send_to_dmc(&mut self, now: Micros, msg: Message, from: NodeId, flow: u32) {
        match self.swarm.leader {
            Some(l) if l == from => self.wimax_send(now, msg, from, NodeId::DMC, flow),
            Some(l) => self.wlan_send(now, msg, from, NodeSet::single(l), flow),
            None => self.net.metrics.bump("unroutable", 1),
        }
    }

    /// Sends from the DMC to a drone through the acting leader.
    fn send_from_dmc(&mut self, now: Micros, msg: Message, flow: u32) {
        match self.swarm.leader {
            Some(l) => self.wimax_send(now, msg, NodeId::DMC, l, flow),
            None => self.net.metrics.bump("unroutable", 1),
        }
    }

    fn on_net(&mut self, now: Micros, ev: NetEvent) {
        let mut sched = std::mem::take(&mut self.sched);
        let mut delivered = Vec::new();
        self.net.handle(now, ev, &mut sched, &mut delivered);
        self.sched = sched;
        self.flush();
        for d in delivered {
            self.on_delivery(now, d);
        }
    }

    fn on_delivery(&mut self, now: Micros, d: Delivery) {
        let r = d.receiver;
        let msg = d.packet.msg;
        let leader = self.swarm.leader;
        match d.link {
            LinkId::Wlan if msg.dst == NodeId::DMC => {
                match leader {
                    Some(l) if l == r => self.wimax_forward(now, d.packet, r, NodeId::DMC),
                    Some(l) if self.net.is_attached(l) => self.wlan_forward(now, d.packet, r, l),
                    _ => self.net.metrics.bump("relay_lost", 1),
                }
                return;
            }
            LinkId::Wlan
                if msg.dst == r
                    && leader != Some(r)
                    && self.former_leaders.contains(r)
                    && matches!(msg.kind, MessageKind::StatusReportSd | MessageKind::Ack)
                    && msg.src != NodeId::DMC =>
            {
                if let Some(l) = leader.filter(|&l| self.net.is_attached(l)) {
                    self.net.metrics.bump("late_arrivals_forwarded", 1);
                    self.wlan_forward(now, d.packet, r, l);
                }
                return;
            }
            LinkId::Wimax if r.is_drone() && msg.dst != r => {
                self.wlan_forward(now, d.packet, r, msg.dst);
                return;
            }
            _ => {}
        }
        if d.packet.frag_count > 1 {
            let key = (msg.src, msg.kind, msg.seq, r);
            let got = self.reassembly.entry(key).or_insert(0);
            *got += 1;
            if *got < d.packet.frag_count {
                return;
            }
            self.reassembly.remove(&key);
        }
        self.app_deliver(now, msg, r);
    }

    fn app_deliver(&mut self, now: Micros, msg: Message, r: NodeId) {
        let m = &mut self.net.metrics;
        m.e2e_latency
            .entry(msg.kind.access_class())
            .or_default()
            .push(now - msg.created_at);
        match msg.kind {
            MessageKind::StatusReportSd => {
                if self.swarm.leader == Some(r) {
                    self.swarm.aggregation_buffer += 1;
                    self.net.metrics.bump("sd_status_aggregated", 1);
                    if self.profile2 && self.can_send(now) {
                        let ack = self.message(MessageKind::Ack, r, msg.src, now);
                        self.wlan_send(now, ack, r, NodeSet::single(msg.src), FLOW_BE);
                    }
                } else {
                    self.net.metrics.bump("sd_status_orphaned", 1);
                }
            }
            MessageKind::StatusReportLd => {
                self.net.metrics.bump("ld_status_delivered", 1);
                if self.profile2 && self.can_send(now) {
                    let ack = self.message(MessageKind::Ack, NodeId::DMC, msg.src, now);
                    self.wimax_send(now, ack, NodeId::DMC, msg.src, FLOW_BE);
                }
            }
            MessageKind::MoveToWaypoint => {
                self.net.metrics.bump("waypoints_delivered", 1);
                if r == self.watch.monitor && self.watch.mode == Some(DetectionMode::Flight) {
                    self.heard(now);
                }
                let resting = self.swarm.drones[r.index()].power_saving;
                if !resting && self.can_send(now) {
                    let ack = self.message(MessageKind::Ack, r, msg.src, now);
                    self.wlan_send(now, ack, r, NodeSet::single(msg.src), FLOW_BE);
                }
            }
            MessageKind::Ack => self.net.metrics.bump("acks_delivered", 1),
            MessageKind::CaseReport => {
                self.net.metrics.bump("case_reports_delivered", 1);
                if self.profile2 && self.can_send(now) {
                    let ack = self.message(MessageKind::Ack, NodeId::DMC, msg.src, now);
                    self.send_from_dmc(now, ack, FLOW_BE);
                    self.start_call(now, msg.src, false);
                }
            }
            MessageKind::VideoFrame => self.net.metrics.bump("video_frames_delivered", 1),
        }
    }

    // ---- periodic traffic ----

    fn on_sd_status(&mut self, now: Micros, id: NodeId) {
        if !self.can_send(now) {
            return;
        }
        let d = &self.swarm.drones[id.index()];
        if self.origin_sd[id.index()] && d.alive && d.phase.is_active() && !d.power_saving {
            match self.swarm.leader {
                Some(l) if l == id => {
                    self.swarm.seq.next(id, MessageKind::StatusReportSd);
                    self.swarm.aggregation_buffer += 1;
                    self.net.metrics.bump("sd_status_aggregated", 1);
                    self.net.metrics.bump("sd_status_loopback", 1);
                }
                Some(l) => {
                    let msg = self.message(MessageKind::StatusReportSd, id, l, now);
                    self.swarm.drones[id.index()].telemetry.last_heard = now;
                    self.wlan_send(now, msg, id, NodeSet::single(l), FLOW_BE);
                }
                None => {}
            }
        }
        if now + SD_STATUS_PERIOD <= self.stop_at {
            self.q.schedule_in(SD_STATUS_PERIOD, Ev::SdStatus(id));
        }
    }

    fn on_ld_status(&mut self, now: Micros) {
        if !self.can_send(now) {
            return;
        }
        if let Some(l) = self.swarm.leader {
            let d = &self.swarm.drones[l.index()];
            if d.alive && d.phase.is_active() {
                let msg = self.message(MessageKind::StatusReportLd, l, NodeId::DMC, now);
                self.wimax_send(now, msg, l, NodeId::DMC, FLOW_BE);
                self.swarm.aggregation_buffer = 0;
                self.net.metrics.bump("ld_status_sent", 1);
                if self.watch.mode == Some(DetectionMode::Collection) {
                    self.heard(now);
                }
            }
        }
        if now + LD_STATUS_PERIOD <= self.stop_at {
            self.q.schedule_in(LD_STATUS_PERIOD, Ev::LdStatus);
        }
    }

    fn on_waypoint(&mut self, now: Micros) {
        if !self.can_send(now) {
            return;
        }
        if let Some(l) = self.swarm.leader {
            let alive = self.swarm.drones[l.index()].alive;
            if alive && self.mode == TrafficMode::Flight {
                let receivers: NodeSet = self
                    .swarm
                    .drones
                    .iter()
                    .filter(|d| d.id != l && d.alive && d.phase.is_active())
                    .map(|d| d.id)
                    .collect();
                if !receivers.is_empty() {
                    let msg = self.message(MessageKind::MoveToWaypoint, l, NodeId::BROADCAST, now);
                    self.wlan_send(now, msg, l, receivers, FLOW_BE);
                }
            }
        }
        if now + WAYPOINT_PERIOD <= self.stop_at {
            self.q.schedule_in(WAYPOINT_PERIOD, Ev::Waypoint);
        }
    }

    // ---- cases and video ----

    fn on_classify(&mut self, now: Micros, sd: NodeId, session: u32) {
        let current = matches!(self.stage, Stage::Session { index, .. } if index == session);
        let d = &self.swarm.drones[sd.index()];
        if !current || !d.alive || d.assigned_target.is_none() || !self.can_send(now) {
            return;
        }
        let draw: f64 = self.rng.random();
        let class = classify_case(draw, self.cfg.infection_rate).expect("rate validated");
        let name = match class {
            CaseClass::Healthy => "cases_healthy",
            CaseClass::Suspicious => "cases_suspicious",
            CaseClass::Infected => "cases_infected",
            CaseClass::Emergency => "cases_emergency",
        };
        self.net.metrics.bump(name, 1);
        if class.escalates() && self.profile2 {
            let msg = self.message(MessageKind::CaseReport, sd, NodeId::DMC, now);
            self.send_to_dmc(now, msg, sd, FLOW_RT);
        }
    }

    fn start_call(&mut self, now: Micros, sd: NodeId, forced: bool) {
        let Some(spec) = self.call_spec else {
            return;
        };
        if !self.can_send(now) || !self.swarm.drones[sd.index()].alive {
            return;
        }
        if self.active_calls >= self.max_calls {
            self.net.metrics.bump("calls_rejected", 1);
            return;
        }
        if self.calls.iter().any(|c| c.rec.sd == sd && c.rec.end.is_none()) {
            self.net.metrics.bump("calls_busy", 1);
            return;
        }
        let idx = self.calls.len();
        self.calls.push(Call {
            rec: CallRecord {
                sd,
                start: now,
                end: None,
                forced,
                frames_up: 0,
                frames_down: 0,
            },
            spec,
            flow: FLOW_VIDEO_BASE + idx as u32,
            open_dirs: 2,
        });
        self.active_calls += 1;
        self.net.metrics.bump("calls_admitted", 1);
        self.q.schedule_in(0, Ev::Frame { call: idx, uplink: true, k: 0 });
        self.q.schedule_in(0, Ev::Frame { call: idx, uplink: false, k: 0 });
    }

    fn end_call(&mut self, now: Micros, idx: usize) {
        let c = &mut self.calls[idx];
        if c.rec.end.is_none() {
            c.rec.end = Some(now);
            self.active_calls -= 1;
        }
    }

    fn on_frame(&mut self, now: Micros, idx: usize, uplink: bool, k: u64) {
        let (sd, spec, flow, start) = {
            let c = &self.calls[idx];
            if c.rec.end.is_some() {
                return;
            }
            (c.rec.sd, c.spec, c.flow, c.rec.start)
        };
        if !self.can_send(now) || !self.swarm.drones[sd.index()].alive {
            self.end_call(now, idx);
            return;
        }
        if uplink {
            let msg = self.message(MessageKind::VideoFrame, sd, NodeId::DMC, now);
            self.send_to_dmc(now, msg, sd, flow);
            self.calls[idx].rec.frames_up += 1;
        } else {
            let msg = self.message(MessageKind::VideoFrame, NodeId::DMC, sd, now);
            self.send_from_dmc(now, msg, flow);
            self.calls[idx].rec.frames_down += 1;
        }
        if k + 1 < spec.frames_in_call() {
            let at = start + spec.frame_offset(k + 1);
            self.q.schedule(at, Ev::Frame { call: idx, uplink, k: k + 1 }).expect("frames move forward");
        } else {
            let c = &mut self.calls[idx];
            c.open_dirs -= 1;
            if c.open_dirs == 0 {
                self.end_call(now, idx);
            }
        }
    }

    fn in_call(&self, id: NodeId) -> bool {
        self.calls.iter().any(|c| c.rec.end.is_none() && c.rec.sd == id)
    }

    // ---- failures and leadership ----

    fn detection_mode(&self) -> Option<DetectionMode> {
        if matches!(self.stage, Stage::Done) || self.aborted {
            return None;
        }
        Some(if self.mode == TrafficMode::Flight {
            DetectionMode::Flight
        } else {
            DetectionMode::Collection
        })
    }

    fn monitor(&self) -> Option<NodeId> {
        if let Some(b) = self.swarm.backup {
            let d = &self.swarm.drones[b.index()];
            if d.alive && d.phase.is_active() {
                return Some(b);
            }
        }
        self.swarm.lowest_alive_sd()
    }

    fn refresh_watch(&mut self, now: Micros) {
        let mode = self.swarm.leader.and(self.detection_mode());
        let Some(monitor) = self.monitor() else {
            self.watch.mode = None;
            return;
        };
        if self.watch.monitor != monitor || self.watch.mode != mode {
            self.watch = LeaderWatch {
                monitor,
                mode,
                last_heard: now,
            };
            if mode.is_some() {
                self.heard(now);
            }
        }
    }

    fn heard(&mut self, now: Micros) {
        self.watch.last_heard = now;
        if let Some(mode) = self.watch.mode {
            self.q.schedule_in(self.cfg.detection.timeout(mode), Ev::WatchCheck);
        }
    }

    fn on_watch_check(&mut self, now: Micros) {
        if now > self.stop_at || self.aborted {
            return;
        }
        let Some(det) = detect_ld_loss(&self.watch, &self.cfg.detection, now) else {
            return;
        };
        let Some(l) = self.swarm.leader else {
            return;
        };
        if self.swarm.drones[l.index()].alive {
            self.net.metrics.bump("false_detections", 1);
            self.heard(now);
            return;
        }
        match hard_handover(&mut self.swarm, &det) {
            Ok(rec) => {
                let failed_at = self.ld_failed_at.take().unwrap_or(det.last_heard);
                self.net.metrics.recovery_times.push(now - failed_at);
                self.net.metrics.bump("hard_handovers", 1);
                self.after_promotion(now, &rec);
                self.handovers.push(rec);
            }
            Err(FailureError::MissionAbort) => self.abort(now, "no drone left to lead"),
            Err(e) => self.deviations.push(format!("hard handover at {now} us failed: {e}")),
        }
    }

    fn after_promotion(&mut self, now: Micros, rec: &HandoverRecord) {
        self.former_leaders.insert(rec.old);
        let new = &mut self.swarm.drones[rec.new.index()];
        if new.phase == PhaseState::Deploying || new.phase.is_airborne() {
            new.waypoint = Some(new.position);
        }
        if let ReallocOutcome::Moved { target, to } = rec.released {
            self.retask(now, to, target);
        }
        self.mode = self.traffic_mode();
        self.refresh_watch(now);
    }

    fn retask(&mut self, now: Micros, to: NodeId, target: TargetId) {
        let pos = self.swarm.plan.target_positions[target as usize];
        let d = &mut self.swarm.drones[to.index()];
        d.waypoint = Some(pos);
        if d.phase == PhaseState::Collecting {
            if let Err(e) = d.apply(PhaseEvent::Reassigned) {
                self.deviations.push(e.to_string());
            }
        }
        if let Stage::Session { index, start, end } = self.stage {
            let from = (start + secs_to_micros(self.cfg.mission.classify_after_s)).clamp(now, end.max(now));
            self.schedule_classification(from, end.max(from + 1), to, index);
        }
    }

    fn schedule_classification(&mut self, from: Micros, end: Micros, sd: NodeId, session: u32) {
        let span = end.saturating_sub(from).max(1);
        let at = from + self.rng.random_range(0..span);
        self.q.schedule(at, Ev::Classify { sd, session }).expect("classification is in the future");
    }

    fn abort(&mut self, now: Micros, why: &str) {
        if !self.aborted {
            self.aborted = true;
            self.deviations.push(format!("mission abort at {now} us: {why}"));
            self.stop_at = self.stop_at.min(now);
        }
    }

    fn on_failure(&mut self, now: Micros, i: usize) {
        let spec = self.cfg.failures[i].clone();
        if self.aborted {
            return;
        }
        match spec.kind {
            FailureKind::LdSudden => self.kill_leader(now),
            FailureKind::LdPredicted => {
                if let Some(l) = self.swarm.leader {
                    let floor = self.cfg.thresholds.battery_floor_pct;
                    let t = &mut self.swarm.drones[l.index()].telemetry;
                    t.battery_pct = t.battery_pct.min(floor - 1.0);
                    self.soft_blocked = false;
                    self.q.schedule_in(0, Ev::PredictCheck);
                }
            }
            FailureKind::SdSudden => {
                let id = NodeId(spec.drone.expect("validated"));
                if self.swarm.leader == Some(id) {
                    self.kill_leader(now);
                } else {
                    self.kill_sd(now, id);
                }
            }
        }
    }

    fn kill_leader(&mut self, now: Micros) {
        let Some(l) = self.swarm.leader else {
            return;
        };
        if !self.swarm.drones[l.index()].alive {
            return;
        }
        if let Err(e) = fail_drone(&mut self.swarm, l) {
            self.deviations.push(e.to_string());
        }
        self.net.detach(l);
        self.ld_failed_at = Some(now);
        self.net.metrics.bump("ld_failures", 1);
        if self.swarm.alive_count() == 0 {
            self.abort(now, "all drones dead");
        }
    }

    fn kill_sd(&mut self, now: Micros, id: NodeId) {
        if !self.swarm.drones[id.index()].alive {
            return;
        }
        self.net.metrics.bump("sd_failures", 1);
        let step = fail_drone(&mut self.swarm, id)
            .and_then(|_| isolate_drone(&mut self.swarm, id))
            .and_then(|_| reallocate_tasks(&mut self.swarm, id));
        self.net.detach(id);
        match step {
            Ok(ReallocOutcome::Moved { target, to }) => self.retask(now, to, target),
            Ok(ReallocOutcome::Queued { .. }) => self.net.metrics.bump("targets_requeued", 1),
            Ok(ReallocOutcome::Unchanged) => {}
            Err(e) => self.deviations.push(format!("SD {id} failure handling: {e}")),
        }
        if self.swarm.backup == Some(id) {
            self.redesignate_backup();
        }
        if self.swarm.alive_count() == 0 {
            self.abort(now, "all drones dead");
        }
        self.refresh_watch(now);
    }

    fn redesignate_backup(&mut self) {
        let next = self
            .swarm
            .drones
            .iter()
            .find(|d| d.is_sd() && d.is_available() && d.phase != PhaseState::Returning)
            .map(|d| d.id);
        for d in self.swarm.drones.iter_mut() {
            if d.role == Role::Backup {
                d.role = Role::Slave;
            }
        }
        if let Some(b) = next {
            self.swarm.drones[b.index()].role = Role::Backup;
        }
        self.swarm.backup = next;
    }

    fn check_prediction(&mut self, now: Micros) {
        if self.soft_blocked || self.aborted || now > self.stop_at {
            return;
        }
        let Some(l) = self.swarm.leader else {
            return;
        };
        let d = &mut self.swarm.drones[l.index()];
        if !d.alive || !d.phase.is_active() {
            return;
        }
        d.telemetry.last_heard = now;
        if !predict_failure(&d.telemetry, &self.cfg.thresholds, now).unwrap_or(false) {
            return;
        }
        match soft_handover(&mut self.swarm, &self.cfg.thresholds, &self.range, now) {
            Ok(rec) => {
                let old = rec.old;
                self.net.metrics.bump("soft_handovers", 1);
                let od = &self.swarm.drones[old.index()];
                if od.phase == PhaseState::Returning {
                    self.solo.insert(old);
                }
                if !od.alive {
                    self.net.detach(old);
                    if let Err(e) = isolate_drone(&mut self.swarm, old) {
                        self.deviations.push(e.to_string());
                    }
                    self.deviations.push(format!("old leader {old} could not reach the DMC and landed in place"));
                }
                self.after_promotion(now, &rec);
                self.handovers.push(rec);
            }
            Err(e) => {
                self.soft_blocked = true;
                self.deviations.push(format!("soft handover at {now} us not possible: {e}"));
            }
        }
    }

    // ---- mission progression ----

    fn traffic_mode(&self) -> TrafficMode {
        let Some(ld) = self.swarm.leader_drone().filter(|d| d.alive) else {
            return self.mode;
        };
        if ld.phase.is_airborne() {
            TrafficMode::Flight
        } else if matches!(ld.phase, PhaseState::Collecting | PhaseState::Reporting) {
            TrafficMode::Collection
        } else {
            TrafficMode::Ground
        }
    }

    fn participants(&self) -> Vec<NodeId> {
        self.swarm
            .drones
            .iter()
            .filter(|d| d.alive && d.phase.is_active() && !self.solo.contains(d.id))
            .map(|d| d.id)
            .collect()
    }

    fn apply_all(&mut self, ids: &[NodeId], from: PhaseState, ev: PhaseEvent) {
        for &id in ids {
            let d = &mut self.swarm.drones[id.index()];
            if d.phase == from {
                if let Err(e) = d.apply(ev) {
                    self.deviations.push(e.to_string());
                }
            }
        }
    }

    fn reached(&self, id: NodeId) -> bool {
        let d = &self.swarm.drones[id.index()];
        d.waypoint.is_none_or(|w| d.position.dist(w.clamp_to(self.swarm.plan.area)) < 1e-6)
    }

    fn jitter(&mut self, p: Pos) -> Pos {
        match self.noise {
            Some(n) => {
                let (dx, dy) = (n.sample(&mut self.rng), n.sample(&mut self.rng));
                p.add(dx, dy)
            }
            None => p,
        }
    }

    /// Points the followers at formation slots around where the leader
    /// will be after the next tick.
    fn steer_formation(&mut self, leader_goal: Option<Pos>) {
        let Some(l) = self.swarm.leader else {
            return;
        };
        let ld = &self.swarm.drones[l.index()];
        let step = self.swarm.plan.speed_mps() * micros_to_secs(TICK);
        let next = match leader_goal {
            Some(g) => {
                if ld.position.dist(g) > 1e-9 {
                    self.heading = (g.y - ld.position.y).atan2(g.x - ld.position.x);
                }
                ld.position.step_toward(g, step)
            }
            None => ld.position,
        };
        self.swarm.drones[l.index()].waypoint = leader_goal.or(Some(next));
        let followers: Vec<NodeId> = self.participants().into_iter().filter(|&id| id != l).collect();
        if followers.is_empty() {
            return;
        }
        let p = &self.swarm.plan;
        let slots = formation_positions(p.formation, followers.len(), p.spacing_m, next, self.heading)
            .expect("spacing validated");
        for (id, slot) in followers.into_iter().zip(slots) {
            let wp = self.jitter(slot);
            self.swarm.drones[id.index()].waypoint = Some(wp);
        }
    }

    fn begin_deploy(&mut self, now: Micros) {
        let center = self.cfg.mission.area_center();
        let avail = self.swarm.available_sds().count();
        let take = avail.min(self.swarm.pending_targets.len());
        let batch: Vec<TargetId> = self.swarm.pending_targets.drain(..take).collect();
        match assign_targets(&self.swarm, &batch) {
            Ok(a) => {
                for (id, t) in a {
                    self.swarm.drones[id.index()].assigned_target = Some(t);
                }
            }
            Err(e) => {
                self.swarm.pending_targets.splice(0..0, batch);
                self.deviations.push(format!("assignment at {now} us: {e}"));
            }
        }
        let parts = self.participants();
        let idle: Vec<NodeId> = parts
            .iter()
            .copied()
            .filter(|&id| Some(id) != self.swarm.leader && self.swarm.drones[id.index()].assigned_target.is_none())
            .collect();
        let standby_y = self.cfg.mission.target_spacing_m * (self.swarm.plan.target_positions.len() as f64).sqrt() + 20.0;
        let standby = if idle.is_empty() {
            Vec::new()
        } else {
            formation_positions(
                Formation::Linear,
                idle.len(),
                self.swarm.plan.spacing_m,
                center.add(0.0, -standby_y),
                0.0,
            )
            .expect("spacing validated")
        };
        for id in parts {
            let d = &self.swarm.drones[id.index()];
            let wp = if Some(id) == self.swarm.leader {
                center
            } else if let Some(t) = d.assigned_target {
                self.swarm.plan.target_positions[t as usize]
            } else {
                standby[idle.iter().position(|&x| x == id).expect("idle drone")]
            };
            self.swarm.drones[id.index()].waypoint = Some(wp.clamp_to(self.swarm.plan.area));
        }
        self.stage = Stage::Deploy;
    }

    fn begin_session(&mut self, now: Micros) {
        let index = self.sessions_started;
        self.sessions_started += 1;
        let end = now + secs_to_micros(self.cfg.mission.session_duration_s);
        self.stage = Stage::Session { index, start: now, end };
        let from = (now + secs_to_micros(self.cfg.mission.classify_after_s)).min(end.saturating_sub(1).max(now));
        let holders: Vec<NodeId> = self
            .swarm
            .drones
            .iter()
            .filter(|d| d.alive && d.assigned_target.is_some())
            .map(|d| d.id)
            .collect();
        for id in holders {
            self.schedule_classification(from, end, id, index);
        }
        self.net.metrics.bump("sessions_started", 1);
    }

    fn end_session(&mut self, now: Micros, index: u32) {
        for d in self.swarm.drones.iter_mut() {
            if let Some(t) = d.assigned_target.take() {
                if d.alive {
                    self.collected.push(t);
                } else {
                    let pos = self.swarm.pending_targets.partition_point(|&x| x < t);
                    self.swarm.pending_targets.insert(pos, t);
                }
            }
        }
        let parts = self.participants();
        for &id in &parts {
            let d = &mut self.swarm.drones[id.index()];
            if d.phase == PhaseState::Deploying {
                if let Some(w) = d.waypoint {
                    d.position = w;
                }
                let _ = d.apply(PhaseEvent::TargetReached);
            }
        }
        self.apply_all(&parts, PhaseState::Collecting, PhaseEvent::SessionComplete);
        let until = now + secs_to_micros(self.cfg.mission.report_s);
        self.stage = Stage::Report { index, until };
    }

    fn send_home(&mut self) {
        let parts = self.participants();
        self.apply_all(&parts, PhaseState::Reporting, PhaseEvent::DataSufficientConfirmation);
        let dmc = self.swarm.plan.dmc_position;
        let cols = ((parts.len() as f64).sqrt().ceil() as usize).max(1);
        for (i, id) in parts.into_iter().enumerate() {
            let pad = dmc.add(-3.0 * (i / cols) as f64, 3.0 * (i % cols) as f64);
            self.swarm.drones[id.index()].waypoint = Some(pad.clamp_to(self.swarm.plan.area));
        }
        self.stage = Stage::Return;
    }

    fn accrue(&mut self, dt: Micros) {
        let dt_s = micros_to_secs(dt);
        *self.net.metrics.mode_time.entry(self.mode).or_default() += dt;
        let e = &self.cfg.energy;
        let any_call = self.active_calls > 0;
        for i in 0..self.swarm.drones.len() {
            let d = &self.swarm.drones[i];
            if !d.alive {
                continue;
            }
            let mut delta = PhaseEnergy::default();
            if d.phase.is_airborne() {
                let budget_s = self.budget_min[hw_index(d.id)] * 60.0;
                delta.rotor_wh = e.spec.battery_capacity_wh * dt_s / budget_s;
                delta.airborne_s = dt_s;
            }
            if d.phase.is_active() {
                let role = if self.swarm.leader == Some(d.id) { PowerRole::Ld } else { PowerRole::Sd };
                let busy = self.in_call(d.id) || (role == PowerRole::Ld && any_call);
                let mult = if busy { e.power.video_multiplier } else { 1.0 };
                delta.compute_wh = e.power.avg_power_w(role) * mult * dt_s / 3600.0;
                delta.powered_s = dt_s;
            }
            let phase = d.phase.name();
            self.ledgers[i].add(phase, delta);
            if delta.airborne_s > 0.0 {
                let budget_s = self.budget_min[hw_index(NodeId(i as u8))] * 60.0;
                let t = &mut self.swarm.drones[i].telemetry;
                t.battery_pct = (t.battery_pct - 100.0 * dt_s / budget_s).max(0.0);
            }
        }
    }

    fn on_tick(&mut self, now: Micros) {
        if now > self.last_tick {
            let dt = now - self.last_tick;
            self.accrue(dt);
            self.swarm.advance(dt).expect("positive step");
            self.last_tick = now;
        }
        if !self.aborted {
            self.progress(now);
            self.land_solo_returners();
            self.check_prediction(now);
            let mode = self.traffic_mode();
            self.mode = mode;
            self.refresh_watch(now);
        }
        if now < self.stop_at {
            let next = (now + TICK).min(self.stop_at);
            self.q.schedule(next, Ev::Tick).expect("future tick");
        }
    }

    fn land_solo_returners(&mut self) {
        for id in self.solo.iter().collect::<Vec<_>>() {
            if self.swarm.drones[id.index()].phase == PhaseState::Returning && self.reached(id) {
                let _ = self.swarm.drones[id.index()].apply(PhaseEvent::Touchdown);
            }
        }
    }

    fn progress(&mut self, now: Micros) {
        let parts = self.participants();
        if parts.is_empty() {
            if !matches!(self.stage, Stage::Done) {
                self.abort(now, "no drone left in the mission");
            }
            return;
        }
        let center = self.cfg.mission.area_center();
        match self.stage {
            Stage::Launch { until } => {
                if self.swarm.drones.iter().any(|d| d.phase == PhaseState::Configured) {
                    self.apply_all(&parts, PhaseState::Configured, PhaseEvent::LaunchCommand);
                    let until = now + secs_to_micros(self.cfg.mission.launch_s);
                    self.stage = Stage::Launch { until };
                    if until > now {
                        return;
                    }
                } else if now < until {
                    return;
                }
                self.apply_all(&parts, PhaseState::Launching, PhaseEvent::AltitudeReached);
                self.stage = Stage::Formation;
                self.steer_formation(None);
            }
            Stage::Formation => {
                if parts.iter().all(|&id| self.reached(id)) {
                    self.apply_all(&parts, PhaseState::InFormation, PhaseEvent::FormationAchieved);
                    self.stage = Stage::Transit;
                    self.steer_formation(Some(center));
                } else {
                    self.steer_formation(None);
                }
            }
            Stage::Transit => {
                let at_area = self.swarm.leader.is_some_and(|l| self.swarm.drones[l.index()].position.dist(center) < 1e-6);
                if at_area {
                    self.apply_all(&parts, PhaseState::Transit, PhaseEvent::TargetAreaReached);
                    self.begin_deploy(now);
                } else {
                    self.steer_formation(Some(center));
                }
            }
            Stage::Deploy => {
                let arrived: Vec<NodeId> = parts
                    .iter()
                    .copied()
                    .filter(|&id| self.swarm.drones[id.index()].phase == PhaseState::Deploying && self.reached(id))
                    .collect();
                self.apply_all(&arrived, PhaseState::Deploying, PhaseEvent::TargetReached);
                if parts.iter().all(|&id| self.swarm.drones[id.index()].phase == PhaseState::Collecting) {
                    self.begin_session(now);
                }
            }
            Stage::Session { index, end, .. } => {
                let arrived: Vec<NodeId> = parts
                    .iter()
                    .copied()
                    .filter(|&id| self.swarm.drones[id.index()].phase == PhaseState::Deploying && self.reached(id))
                    .collect();
                self.apply_all(&arrived, PhaseState::Deploying, PhaseEvent::TargetReached);
                if now >= end {
                    self.end_session(now, index);
                }
            }
            Stage::Report { index, until } => {
                if now < until {
                    return;
                }
                let done = index + 1;
                let more = !self.swarm.pending_targets.is_empty()
                    && done < self.cfg.mission.n_sessions
                    && self.swarm.available_sds().next().is_some();
                if more {
                    self.apply_all(&parts, PhaseState::Reporting, PhaseEvent::RepositionCommand);
                    self.begin_deploy(now);
                } else {
                    self.send_home();
                }
            }
            Stage::Return => {
                let arrived: Vec<NodeId> = parts
                    .iter()
                    .copied()
                    .filter(|&id| self.swarm.drones[id.index()].phase == PhaseState::Returning && self.reached(id))
                    .collect();
                self.apply_all(&arrived, PhaseState::Returning, PhaseEvent::Touchdown);
                if self.participants().is_empty() {
                    self.stage = Stage::Done;
                    self.mission_complete = true;
                    self.stop_at = self.stop_at.min(now);
                }
            }
            Stage::Done => {}
        }
    }
}
