use super::{
    compute_battery_sessions, flight_battery_sessions, payload_ratio, BatteryPlan,
    ComputeRadioPower, DeratingCurve, DroneSpec, EnergyError, PayloadManifest, PowerRole,
};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DurabilityConfig {
    pub spec: DroneSpec,
    pub manifest: PayloadManifest,
    pub curve: DeratingCurve,
    pub power: ComputeRadioPower,
    pub plan: BatteryPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurabilityRow {
    pub battery: String,
    pub max_sessions: u32,
    pub max_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurabilityReport {
    pub rows: Vec<DurabilityRow>,
    /// Index into `rows` of the binding battery.
    pub limit_row: usize,
}

impl DurabilityReport {
    pub fn system_limit(&self) -> &DurabilityRow {
        &self.rows[self.limit_row]
    }
}

impl fmt::Display for DurabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>22} {:>26}", "Battery Type", "Max. Number of Sessions", "Max. Operating Time (hours)")?;
        for r in &self.rows {
            writeln!(f, "{:<28} {:>22} {:>26}", r.battery, r.max_sessions, r.max_hours)?;
        }
        let lim = self.system_limit();
        writeln!(
            f,
            "System limit: {} h ({} sessions), bound by {}",
            lim.max_hours, lim.max_sessions, lim.battery
        )
    }
}

/// Maximum sessions and operating hours for each battery, flight and
/// onboard-computer, of the leader and slave drones.
pub fn durability_report(config: &DurabilityConfig) -> Result<DurabilityReport, EnergyError> {
    config.spec.validate()?;
    config.curve.validate()?;
    let plan = &config.plan;
    let mut rows = Vec::with_capacity(4);
    for (label, role) in [("LD", PowerRole::Ld), ("SD", PowerRole::Sd)] {
        let pct = payload_ratio(config.manifest.total_g(role), config.spec.base_weight_g)?;
        let sessions = flight_battery_sessions(plan, &config.spec, pct, &config.curve);
        rows.push(DurabilityRow {
            battery: format!("Drone Battery ({label})"),
            max_sessions: sessions,
            max_hours: sessions as f64 * plan.session_h,
        });
    }
    for (label, role) in [("LD", PowerRole::Ld), ("SD", PowerRole::Sd)] {
        let sessions = compute_battery_sessions(plan, role, &config.power);
        rows.push(DurabilityRow {
            battery: format!("Raspberry Pi Battery ({label})"),
            max_sessions: sessions,
            max_hours: sessions as f64 * plan.session_h,
        });
    }
    let limit_row = rows
        .iter()
        .enumerate()
        .min_by_key(|(_, r)| r.max_sessions)
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(DurabilityReport { rows, limit_row })
}
