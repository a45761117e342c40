//! Drone state, the phase machine, formation geometry and task assignment.

mod geometry;
mod phase;
mod tasks;

pub use geometry::{advance_kinematics, formation_positions, Formation, Pos};
pub use phase::{transition_phase, PhaseEvent, PhaseState};
pub use tasks::{assign_targets, classify_case, Assignment, CaseClass, TargetId};

use crate::protocol::SeqCounters;
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("swarm needs at least one slave drone")]
    EmptySwarm,
    #[error("backup leader {0} is not a slave drone")]
    BackupNotSd(NodeId),
    #[error("no such drone: {0}")]
    UnknownDrone(NodeId),
    #[error("illegal transition: event {event:?} in phase {phase}")]
    IllegalTransition { phase: PhaseState, event: PhaseEvent },
    #[error("{targets} targets but only {sds} alive slave drones")]
    TooManyTargets { targets: usize, sds: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("infection rate {0} outside [0, 1]")]
    InfectionRate(f64),
    #[error("unknown formation {0:?}")]
    UnknownFormation(String),
    #[error("time step must be positive")]
    ZeroStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Leader,
    Slave,
    /// Slave drone designated to take over leadership.
    Backup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub battery_pct: f64,
    pub temperature_c: f64,
    pub last_heard: Micros,
}

impl Default for Telemetry {
    fn default() -> Self {
        Self {
            battery_pct: 100.0,
            temperature_c: 25.0,
            last_heard: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drone {
    pub id: NodeId,
    pub role: Role,
    pub position: Pos,
    pub phase: PhaseState,
    pub assigned_target: Option<TargetId>,
    pub alive: bool,
    pub telemetry: Telemetry,
    /// Where kinematics steers the drone while airborne.
    pub waypoint: Option<Pos>,
    /// Demoted leader resting after a soft handover; sends no reports.
    pub power_saving: bool,
    /// Phases visited from `Configured` on.
    pub trace: Vec<PhaseState>,
}

impl Drone {
    fn new(id: NodeId, role: Role, position: Pos) -> Self {
        Self {
            id,
            role,
            position,
            phase: PhaseState::PoweredUp,
            assigned_target: None,
            alive: true,
            telemetry: Telemetry::default(),
            waypoint: None,
            power_saving: false,
            trace: Vec::new(),
        }
    }

    pub fn apply(&mut self, event: PhaseEvent) -> Result<(), SwarmError> {
        self.phase = transition_phase(self.phase, event)?;
        self.trace.push(self.phase);
        Ok(())
    }

    pub fn is_sd(&self) -> bool {
        matches!(self.role, Role::Slave | Role::Backup)
    }

    /// Alive, not isolated or landed, and not resting.
    pub fn is_available(&self) -> bool {
        self.alive && self.phase.is_active() && !self.power_saving
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionPlan {
    pub dmc_position: Pos,
    /// Operating area is `[0, area.x] × [0, area.y]`.
    pub area: Pos,
    pub target_positions: Vec<Pos>,
    pub formation: Formation,
    pub spacing_m: f64,
    pub speed_kmh: f64,
    pub session_duration_s: f64,
    pub n_sessions: u32,
    pub reposition_time_s: f64,
}

impl Default for MissionPlan {
    fn default() -> Self {
        Self {
            dmc_position: Pos::new(500.0, 1000.0),
            area: Pos::new(2000.0, 2000.0),
            target_positions: Vec::new(),
            formation: Formation::Linear,
            spacing_m: 12.0,
            speed_kmh: 12.0,
            session_duration_s: 1800.0,
            n_sessions: 12,
            reposition_time_s: 60.0,
        }
    }
}

impl MissionPlan {
    pub fn validate(&self) -> Result<(), SwarmError> {
        for (v, name) in [
            (self.spacing_m, "spacing_m"),
            (self.speed_kmh, "speed_kmh"),
            (self.session_duration_s, "session_duration_s"),
            (self.area.x, "area.x"),
            (self.area.y, "area.y"),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(SwarmError::NonPositive(name));
            }
        }
        Ok(())
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmState {
    pub plan: MissionPlan,
    /// Indexed by node id.
    pub drones: Vec<Drone>,
    pub leader: Option<NodeId>,
    pub backup: Option<NodeId>,
    /// Slave-drone reports received by the leader since its last status upload.
    pub aggregation_buffer: u32,
    /// Targets waiting for a free slave drone in a later session, sorted.
    pub pending_targets: Vec<TargetId>,
    #[serde(skip)]
    pub seq: SeqCounters,
}

pub const LEADER_ID: NodeId = NodeId(0);

/// Builds a leader (id 0) and `n` slave drones (ids `1..=n`), all
/// configured and parked on a 3 m ground grid at the DMC.
pub fn init_swarm(plan: MissionPlan, n: usize, backup_id: NodeId) -> Result<SwarmState, SwarmError> {
    plan.validate()?;
    if n == 0 {
        return Err(SwarmError::EmptySwarm);
    }
    if n >= NodeId::MAX_DRONES {
        return Err(SwarmError::UnknownDrone(NodeId(n as u8)));
    }
    if backup_id.0 == 0 || backup_id.index() > n {
        return Err(SwarmError::BackupNotSd(backup_id));
    }
    let cols = (n as f64 + 1.0).sqrt().ceil() as usize;
    let pad = |i: usize| {
        plan.dmc_position
            .add(-3.0 * (i / cols) as f64, 3.0 * (i % cols) as f64)
            .clamp_to(plan.area)
    };
    let mut drones = Vec::with_capacity(n + 1);
    drones.push(Drone::new(LEADER_ID, Role::Leader, pad(0)));
    for i in 1..=n {
        let role = if i == backup_id.index() { Role::Backup } else { Role::Slave };
        drones.push(Drone::new(NodeId(i as u8), role, pad(i)));
    }
    for d in drones.iter_mut() {
        d.apply(PhaseEvent::ConnectionEstablished)?;
        d.apply(PhaseEvent::MissionUploaded)?;
        d.trace = vec![PhaseState::Configured];
    }
    Ok(SwarmState {
        plan,
        drones,
        leader: Some(LEADER_ID),
        backup: Some(backup_id),
        aggregation_buffer: 0,
        pending_targets: Vec::new(),
        seq: SeqCounters::default(),
    })
}

impl SwarmState {
    pub fn drone(&self, id: NodeId) -> Result<&Drone, SwarmError> {
        self.drones.get(id.index()).ok_or(SwarmError::UnknownDrone(id))
    }

    pub fn drone_mut(&mut self, id: NodeId) -> Result<&mut Drone, SwarmError> {
        self.drones.get_mut(id.index()).ok_or(SwarmError::UnknownDrone(id))
    }

    pub fn n_sds(&self) -> usize {
        self.drones.len() - 1
    }

    /// Alive drones currently holding the leader role.
    pub fn alive_leaders(&self) -> usize {
        self.drones
            .iter()
            .filter(|d| d.alive && d.role == Role::Leader)
            .count()
    }

    pub fn alive_count(&self) -> usize {
        self.drones.iter().filter(|d| d.alive).count()
    }

    /// Slave drones that can take tasks, in id order.
    pub fn available_sds(&self) -> impl Iterator<Item = &Drone> {
        self.drones.iter().filter(|d| d.is_sd() && d.is_available())
    }

    /// Lowest-id alive slave drone, the fallback when the backup is gone.
    pub fn lowest_alive_sd(&self) -> Option<NodeId> {
        self.drones
            .iter()
            .find(|d| d.is_sd() && d.alive && d.phase.is_active() && d.phase != PhaseState::Returning)
            .map(|d| d.id)
    }

    pub fn leader_drone(&self) -> Option<&Drone> {
        self.leader.and_then(|l| self.drones.get(l.index()))
    }
}
