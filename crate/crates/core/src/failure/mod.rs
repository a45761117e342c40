//! Leader handover (soft and hard), failure prediction and detection, and
//! slave-drone reallocation, isolation and return-to-base.

use crate::protocol::{MessageKind, SD_STATUS_PERIOD, WAYPOINT_PERIOD, LD_STATUS_PERIOD};
use crate::swarm::{PhaseEvent, PhaseState, Role, SwarmError, SwarmState, Telemetry, TargetId};
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FailureError {
    #[error("telemetry is {age} us old, older than one reporting period")]
    StaleTelemetry { age: Micros },
    #[error("no failure predicted, soft handover not warranted")]
    NotPredicted,
    #[error("leader {0} is not alive")]
    LeaderDead(NodeId),
    #[error("swarm has no acting leader")]
    NoLeader,
    #[error("no drone left alive: mission abort")]
    MissionAbort,
    #[error("drone {0} is the acting leader; hand over before isolating it")]
    IsolateLeader(NodeId),
    #[error("drone {0} has not failed")]
    NotFailed(NodeId),
    #[error("drone {0} is not a slave drone")]
    NotSd(NodeId),
    #[error("failure time {at} us is outside the {horizon} us horizon")]
    OutsideHorizon { at: Micros, horizon: Micros },
    #[error(transparent)]
    Swarm(#[from] SwarmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    LdSudden,
    LdPredicted,
    SdSudden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub kind: FailureKind,
    pub drone: NodeId,
    pub at: Micros,
}

impl FailureEvent {
    pub fn check_horizon(&self, horizon: Micros) -> Result<(), FailureError> {
        if self.at > horizon {
            return Err(FailureError::OutsideHorizon { at: self.at, horizon });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionThresholds {
    pub battery_floor_pct: f64,
    pub temperature_ceiling_c: f64,
    pub horizon_s: f64,
}

impl Default for PredictionThresholds {
    fn default() -> Self {
        Self {
            battery_floor_pct: 15.0,
            temperature_ceiling_c: 60.0,
            horizon_s: 60.0,
        }
    }
}

/// True iff the battery is under the floor or the board is over temperature.
/// Refuses telemetry older than one status period.
pub fn predict_failure(t: &Telemetry, th: &PredictionThresholds, now: Micros) -> Result<bool, FailureError> {
    let age = now.saturating_sub(t.last_heard);
    if age > SD_STATUS_PERIOD {
        return Err(FailureError::StaleTelemetry { age });
    }
    Ok(t.battery_pct < th.battery_floor_pct || t.temperature_c > th.temperature_ceiling_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Watching the leader's waypoint broadcasts.
    Flight,
    /// Watching the leader's periodic status uploads.
    Collection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub flight_missed_broadcasts: u32,
    pub collection_missed_periods: u32,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            flight_missed_broadcasts: 3,
            collection_missed_periods: 2,
        }
    }
}

impl DetectionConfig {
    pub fn timeout(&self, mode: DetectionMode) -> Micros {
        match mode {
            DetectionMode::Flight => self.flight_missed_broadcasts as Micros * WAYPOINT_PERIOD,
            DetectionMode::Collection => self.collection_missed_periods as Micros * LD_STATUS_PERIOD,
        }
    }
}

/// What the monitoring drone last heard from the leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderWatch {
    pub monitor: NodeId,
    pub mode: Option<DetectionMode>,
    pub last_heard: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub at: Micros,
    pub monitor: NodeId,
    pub mode: DetectionMode,
    pub last_heard: Micros,
}

pub fn detect_ld_loss(watch: &LeaderWatch, cfg: &DetectionConfig, now: Micros) -> Option<Detection> {
    let mode = watch.mode?;
    (now.saturating_sub(watch.last_heard) >= cfg.timeout(mode)).then_some(Detection {
        at: now,
        monitor: watch.monitor,
        mode,
        last_heard: watch.last_heard,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverKind {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoverRecord {
    pub kind: HandoverKind,
    pub at: Micros,
    pub old: NodeId,
    pub new: NodeId,
    /// The designated backup was unavailable; the lowest-id SD was promoted.
    pub fallback: bool,
    /// Slave reports held by the old leader and lost with it.
    pub lost_aggregate: u32,
    /// Outcome for the task the promoted drone was holding.
    pub released: ReallocOutcome,
    pub new_backup: Option<NodeId>,
}

const LEADER_KINDS: [MessageKind; 3] = [MessageKind::StatusReportLd, MessageKind::MoveToWaypoint, MessageKind::Ack];

fn successor(state: &SwarmState) -> Result<(NodeId, bool), FailureError> {
    if let Some(b) = state.backup {
        let d = state.drone(b)?;
        if d.alive && d.phase.is_active() && d.role == Role::Backup {
            return Ok((b, false));
        }
    }
    state
        .lowest_alive_sd()
        .map(|id| (id, true))
        .ok_or(FailureError::MissionAbort)
}

fn promote(state: &mut SwarmState, new: NodeId) -> Result<(ReallocOutcome, Option<NodeId>), FailureError> {
    let released = reallocate_tasks(state, new)?;
    let d = state.drone_mut(new)?;
    d.role = Role::Leader;
    d.power_saving = false;
    state.leader = Some(new);
    let next_backup = state
        .drones
        .iter()
        .find(|d| d.is_sd() && d.is_available() && d.phase != PhaseState::Returning)
        .map(|d| d.id);
    for d in state.drones.iter_mut() {
        if d.role == Role::Backup {
            d.role = Role::Slave;
        }
    }
    if let Some(b) = next_backup {
        state.drone_mut(b)?.role = Role::Backup;
    }
    state.backup = next_backup;
    Ok((released, next_backup))
}

/// Hands leadership to the backup before the predicted failure. Sequence
/// counters and the aggregation buffer move with it; nothing is lost.
pub fn soft_handover(
    state: &mut SwarmState,
    th: &PredictionThresholds,
    range: &RangeModel,
    now: Micros,
) -> Result<HandoverRecord, FailureError> {
    let old = state.leader.ok_or(FailureError::NoLeader)?;
    let ld = state.drone(old)?;
    if !ld.alive {
        return Err(FailureError::LeaderDead(old));
    }
    let mut own = ld.telemetry;
    own.last_heard = now;
    if !predict_failure(&own, th, now)? {
        return Err(FailureError::NotPredicted);
    }
    let (new, fallback) = successor(state)?;
    for kind in LEADER_KINDS {
        state.seq.carry_over(old, new, kind);
    }
    let (released, new_backup) = promote(state, new)?;
    let d = state.drone_mut(old)?;
    d.role = Role::Slave;
    d.power_saving = true;
    if own.battery_pct < th.battery_floor_pct {
        return_to_base(state, old, range)?;
    }
    Ok(HandoverRecord {
        kind: HandoverKind::Soft,
        at: now,
        old,
        new,
        fallback,
        lost_aggregate: 0,
        released,
        new_backup,
    })
}

/// Promotes the backup after the leader was lost. The old leader's
/// aggregation buffer is gone and reported as lost.
pub fn hard_handover(state: &mut SwarmState, detection: &Detection) -> Result<HandoverRecord, FailureError> {
    let old = state.leader.ok_or(FailureError::NoLeader)?;
    if state.alive_count() == 0 {
        return Err(FailureError::MissionAbort);
    }
    let (new, fallback) = successor(state)?;
    let lost_aggregate = std::mem::take(&mut state.aggregation_buffer);
    let (released, new_backup) = promote(state, new)?;
    let d = state.drone_mut(old)?;
    d.role = Role::Slave;
    if !d.alive {
        isolate_drone(state, old)?;
    }
    Ok(HandoverRecord {
        kind: HandoverKind::Hard,
        at: detection.at,
        old,
        new,
        fallback,
        lost_aggregate,
        released,
        new_backup,
    })
}

/// Marks a drone dead. Its task stays assigned until reallocated.
pub fn fail_drone(state: &mut SwarmState, id: NodeId) -> Result<(), FailureError> {
    let d = state.drone_mut(id)?;
    if !d.alive {
        return Ok(());
    }
    d.alive = false;
    if d.phase != PhaseState::Failed && d.phase != PhaseState::Isolated {
        d.apply(PhaseEvent::Failure)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReallocOutcome {
    /// The drone held no target.
    Unchanged,
    Moved { target: TargetId, to: NodeId },
    Queued { target: TargetId },
}

/// Moves `from`'s target to the lowest-id idle slave drone, or queues it
/// for the next session when every SD is busy.
pub fn reallocate_tasks(state: &mut SwarmState, from: NodeId) -> Result<ReallocOutcome, FailureError> {
    let Some(target) = state.drone_mut(from)?.assigned_target.take() else {
        return Ok(ReallocOutcome::Unchanged);
    };
    let idle = state
        .drones
        .iter()
        .find(|d| {
            d.id != from && d.is_sd() && d.is_available() && d.assigned_target.is_none() && d.phase != PhaseState::Returning
        })
        .map(|d| d.id);
    match idle {
        Some(to) => {
            state.drone_mut(to)?.assigned_target = Some(target);
            Ok(ReallocOutcome::Moved { target, to })
        }
        None => {
            let pos = state.pending_targets.partition_point(|&t| t < target);
            state.pending_targets.insert(pos, target);
            Ok(ReallocOutcome::Queued { target })
        }
    }
}

/// Cuts a failed drone out of the swarm. Returns whether anything changed.
pub fn isolate_drone(state: &mut SwarmState, id: NodeId) -> Result<bool, FailureError> {
    if state.leader == Some(id) {
        return Err(FailureError::IsolateLeader(id));
    }
    let d = state.drone_mut(id)?;
    match d.phase {
        PhaseState::Isolated => Ok(false),
        _ if d.alive => Err(FailureError::NotFailed(id)),
        PhaseState::Failed => {
            d.apply(PhaseEvent::Isolate)?;
            d.waypoint = None;
            Ok(true)
        }
        _ => {
            d.apply(PhaseEvent::Failure)?;
            d.apply(PhaseEvent::Isolate)?;
            Ok(true)
        }
    }
}

/// Flight range check for a drone heading home.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeModel {
    /// Minutes a full battery lasts at the drone's payload.
    pub flight_budget_min: f64,
    pub speed_mps: f64,
}

impl RangeModel {
    pub fn required_pct(&self, distance_m: f64) -> f64 {
        let minutes = distance_m / self.speed_mps / 60.0;
        100.0 * minutes / self.flight_budget_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnOutcome {
    AlreadyLanded,
    Returning,
    /// Not enough battery for the trip; landed where it was.
    FailedInPlace,
}

/// Sends `id` back to the DMC, releasing any task it held.
pub fn return_to_base(state: &mut SwarmState, id: NodeId, range: &RangeModel) -> Result<ReturnOutcome, FailureError> {
    let dmc = state.plan.dmc_position;
    let d = state.drone(id)?;
    if matches!(d.phase, PhaseState::Landed | PhaseState::Returning) {
        return Ok(ReturnOutcome::AlreadyLanded);
    }
    if !d.alive {
        return Err(FailureError::NotFailed(id));
    }
    let need = range.required_pct(d.position.dist(dmc));
    let enough = d.telemetry.battery_pct >= need;
    reallocate_tasks(state, id)?;
    let d = state.drone_mut(id)?;
    if !enough {
        d.alive = false;
        d.apply(PhaseEvent::Failure)?;
        return Ok(ReturnOutcome::FailedInPlace);
    }
    d.apply(PhaseEvent::ReturnToBase)?;
    d.waypoint = Some(dmc);
    Ok(ReturnOutcome::Returning)
}
