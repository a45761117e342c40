//! Payload derating, flight-time budgets, per-phase energy ledgers and
//! battery sizing for the drone and onboard-computer batteries.
//!
//! Two distinct batteries are tracked per drone. The flight battery powers
//! the rotors and is drained only while airborne (drones are landed while
//! collecting). The onboard-computer battery pack powers the Raspberry Pi,
//! radios and camera for the whole mission.

mod durability;
mod ledger;

pub use durability::{durability_report, DurabilityConfig, DurabilityReport, DurabilityRow};
pub use ledger::{EnergyLedger, PhaseEnergy};

use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("drone weight must be positive, got {0} g")]
    NonPositiveWeight(f64),
    #[error("payload weight must be non-negative, got {0} g")]
    NegativePayload(f64),
    #[error("unknown power role {0:?}")]
    UnknownRole(String),
    #[error("derating curve invalid: {0}")]
    Curve(&'static str),
    #[error("battery spec inconsistent: {0}")]
    Spec(String),
}

/// Quadcopter platform figures (DJI Phantom 4 Pro V2.0 by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroneSpec {
    pub base_weight_g: f64,
    pub base_flight_time_min: f64,
    pub battery_voltage_v: f64,
    pub battery_charge_mah: f64,
    pub battery_capacity_wh: f64,
    pub max_speed_p_mode_kmh: f64,
}

impl Default for DroneSpec {
    fn default() -> Self {
        Self {
            base_weight_g: 1375.0,
            base_flight_time_min: 30.0,
            battery_voltage_v: 15.2,
            battery_charge_mah: 5870.0,
            battery_capacity_wh: 89.2,
            max_speed_p_mode_kmh: 50.0,
        }
    }
}

impl DroneSpec {
    /// Capacity must agree with voltage times charge within 1%.
    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.base_weight_g <= 0.0 {
            return Err(EnergyError::NonPositiveWeight(self.base_weight_g));
        }
        let computed = self.battery_voltage_v * self.battery_charge_mah / 1000.0;
        if ((computed - self.battery_capacity_wh) / self.battery_capacity_wh).abs() > 0.01 {
            return Err(EnergyError::Spec(format!(
                "{} Wh declared but {} V x {} mAh = {computed:.2} Wh",
                self.battery_capacity_wh, self.battery_voltage_v, self.battery_charge_mah
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadElement {
    pub name: String,
    pub weight_g: f64,
    pub on_ld: bool,
    pub on_sd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadManifest {
    pub elements: Vec<PayloadElement>,
}

impl Default for PayloadManifest {
    fn default() -> Self {
        let e = |name: &str, weight_g, on_ld, on_sd| PayloadElement {
            name: name.to_string(),
            weight_g,
            on_ld,
            on_sd,
        };
        Self {
            elements: vec![
                e("Raspberry Pi 3 B", 42.0, true, true),
                e("Arducam OV5647 camera", 9.0, false, true),
                e("Li-Polymer battery HAT (SW6106)", 76.0, true, true),
                e("3000 mAh LiPo extra battery", 48.0, true, true),
                e("Navio2 autopilot", 23.0, true, true),
                e("SIM7600E WiMAX adapter HAT", 12.6, true, false),
            ],
        }
    }
}

impl PayloadManifest {
    pub fn total_g(&self, role: PowerRole) -> f64 {
        self.elements
            .iter()
            .filter(|e| match role {
                PowerRole::Ld => e.on_ld,
                PowerRole::Sd => e.on_sd,
            })
            .map(|e| e.weight_g)
            .sum()
    }
}

/// Payload-percentage to rotor power-increase-percentage mapping, linear
/// between anchors and extrapolated from the end segments.
///
/// The default anchor `(15, 25)` makes a 15% payload cut a 30-minute flight
/// to 24 minutes under `t = t0 / (1 + increase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeratingCurve {
    pub anchors: Vec<(f64, f64)>,
}

impl Default for DeratingCurve {
    fn default() -> Self {
        Self {
            anchors: vec![(0.0, 0.0), (15.0, 25.0)],
        }
    }
}

impl DeratingCurve {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, EnergyError> {
        let curve = Self { anchors };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.anchors.len() < 2 {
            return Err(EnergyError::Curve("need at least two anchors"));
        }
        if self.anchors[0] != (0.0, 0.0) {
            return Err(EnergyError::Curve("first anchor must be (0, 0)"));
        }
        for w in self.anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(EnergyError::Curve("payload anchors must strictly increase"));
            }
            if w[1].1 < w[0].1 {
                return Err(EnergyError::Curve("power increase must be non-decreasing"));
            }
        }
        Ok(())
    }

    pub fn power_increase_pct(&self, payload_pct: f64) -> f64 {
        let a = &self.anchors;
        let seg = a
            .windows(2)
            .position(|w| payload_pct <= w[1].0)
            .unwrap_or(a.len() - 2);
        let (x0, y0) = a[seg];
        let (x1, y1) = a[seg + 1];
        y0 + (payload_pct - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Onboard computer and radio draw, averaged over a collection session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeRadioPower {
    pub ld_avg_power_w: f64,
    pub sd_avg_power_w: f64,
    pub pi_battery_wh: f64,
    pub video_multiplier: f64,
}

/// Two 3000 mAh cells at 3.7 V.
pub const PI_BATTERY_WH: f64 = 2.0 * 3.0 * 3.7;
pub const SESSION_HOURS: f64 = 0.5;

impl ComputeRadioPower {
    /// Average draw that exhausts `pi_battery_wh` after exactly
    /// `sessions` sessions of `session_h` hours.
    pub fn back_calculated_w(pi_battery_wh: f64, sessions: u32, session_h: f64) -> f64 {
        pi_battery_wh / (sessions as f64 * session_h)
    }

    pub fn avg_power_w(&self, role: PowerRole) -> f64 {
        match role {
            PowerRole::Ld => self.ld_avg_power_w,
            PowerRole::Sd => self.sd_avg_power_w,
        }
    }
}

impl Default for ComputeRadioPower {
    fn default() -> Self {
        Self {
            ld_avg_power_w: Self::back_calculated_w(PI_BATTERY_WH, 28, SESSION_HOURS),
            sd_avg_power_w: Self::back_calculated_w(PI_BATTERY_WH, 15, SESSION_HOURS),
            pi_battery_wh: PI_BATTERY_WH,
            video_multiplier: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRole {
    Ld,
    Sd,
}

impl FromStr for PowerRole {
    type Err = EnergyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ld" | "leader" => Ok(PowerRole::Ld),
            "sd" | "slave" => Ok(PowerRole::Sd),
            _ => Err(EnergyError::UnknownRole(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionKind {
    Idle,
    /// A video call of the given length (seconds) inside the interval.
    Video { call_s: f64 },
}

pub fn payload_ratio(payload_g: f64, drone_g: f64) -> Result<f64, EnergyError> {
    if drone_g <= 0.0 {
        return Err(EnergyError::NonPositiveWeight(drone_g));
    }
    if payload_g < 0.0 {
        return Err(EnergyError::NegativePayload(payload_g));
    }
    Ok(100.0 * payload_g / drone_g)
}

pub fn derate_flight_time(base_min: f64, payload_pct: f64, curve: &DeratingCurve) -> f64 {
    base_min / (1.0 + curve.power_increase_pct(payload_pct) / 100.0)
}

/// Round trip to the target area plus one repositioning flight per session.
pub fn total_flight_time(dmc_leg_min: f64, n_sessions: u32, reposition_min: f64) -> f64 {
    2.0 * dmc_leg_min + n_sessions as f64 * reposition_min
}

/// Flight-battery energy for `flight_min` of flight under linear drain.
pub fn rotor_energy(flight_min: f64, spec: &DroneSpec, payload_pct: f64, curve: &DeratingCurve) -> f64 {
    let budget = derate_flight_time(spec.base_flight_time_min, payload_pct, curve);
    flight_min / budget * spec.battery_capacity_wh
}

/// Onboard-computer energy over `duration_s`; a video call draws
/// `video_multiplier` times the role's average for its duration.
pub fn network_compute_energy(
    duration_s: f64,
    role: PowerRole,
    power: &ComputeRadioPower,
    kind: SessionKind,
) -> f64 {
    let p = power.avg_power_w(role);
    let call_s = match kind {
        SessionKind::Idle => 0.0,
        SessionKind::Video { call_s } => call_s.clamp(0.0, duration_s),
    };
    (p * (duration_s - call_s) + p * power.video_multiplier * call_s) / 3600.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryPlan {
    pub dmc_leg_min: f64,
    pub reposition_min: f64,
    pub n_sessions: u32,
    pub session_h: f64,
}

impl Default for BatteryPlan {
    fn default() -> Self {
        Self {
            dmc_leg_min: 6.0,
            reposition_min: 1.0,
            n_sessions: 12,
            session_h: SESSION_HOURS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub max_sessions: u32,
    pub flight_battery_sessions: u32,
    pub compute_battery_sessions: u32,
}

// Guards floor() against representation error in exact-ratio cases such as
// 22.2 Wh / (1.5857 W * 0.5 h).
const FLOOR_SLACK: f64 = 1e-9;

/// Largest session count the flight battery supports.
pub fn flight_battery_sessions(
    plan: &BatteryPlan,
    spec: &DroneSpec,
    payload_pct: f64,
    curve: &DeratingCurve,
) -> u32 {
    let budget = derate_flight_time(spec.base_flight_time_min, payload_pct, curve);
    let spare = budget - 2.0 * plan.dmc_leg_min;
    if spare < 0.0 {
        return 0;
    }
    if plan.reposition_min <= 0.0 {
        return u32::MAX;
    }
    let mut n = (spare / plan.reposition_min + FLOOR_SLACK).floor() as u32;
    // Settle on the exact energy comparison at the boundary.
    let fits = |n: u32| {
        rotor_energy(total_flight_time(plan.dmc_leg_min, n, plan.reposition_min), spec, payload_pct, curve)
            <= spec.battery_capacity_wh * (1.0 + FLOOR_SLACK)
    };
    while n > 0 && !fits(n) {
        n -= 1;
    }
    while fits(n + 1) {
        n += 1;
    }
    n
}

pub fn compute_battery_sessions(plan: &BatteryPlan, role: PowerRole, power: &ComputeRadioPower) -> u32 {
    let per_session = network_compute_energy(plan.session_h * 3600.0, role, power, SessionKind::Idle);
    if per_session <= 0.0 {
        return u32::MAX;
    }
    (power.pi_battery_wh / per_session + FLOOR_SLACK).floor() as u32
}

pub fn battery_feasible(
    plan: &BatteryPlan,
    spec: &DroneSpec,
    payload_pct: f64,
    curve: &DeratingCurve,
    power: &ComputeRadioPower,
    role: PowerRole,
) -> Feasibility {
    let flight = flight_battery_sessions(plan, spec, payload_pct, curve);
    let compute = compute_battery_sessions(plan, role, power);
    let max_sessions = flight.min(compute);
    Feasibility {
        feasible: max_sessions >= plan.n_sessions,
        max_sessions,
        flight_battery_sessions: flight,
        compute_battery_sessions: compute,
    }
}
