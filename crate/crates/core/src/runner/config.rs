use crate::energy::{durability_report, DurabilityConfig};
use crate::failure::{DetectionConfig, FailureKind, PredictionThresholds};
use crate::netsim::wlan::{CALIBRATED_OVERHEAD_BYTES, DATA_RATES_MBPS};
use crate::netsim::{QosScope, WimaxConfig, WlanConfig};
use crate::protocol::{LdStatusFormula, Phasing, VideoCallSpec, DEFAULT_WAYPOINT_LEN, HEADER_LEN};
use crate::swarm::{Formation, MissionPlan, Pos};
use crate::{secs_to_micros, Micros, NodeId};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{0:?} is not a sweepable field")]
    NotSweepable(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WlanSection {
    pub data_rate_mbps: f64,
    /// Packets per second each receiver can process.
    pub proc_rate: u64,
    pub edca: bool,
    pub buffer_bits: u64,
    pub overhead_bytes: u32,
    pub mtu: u32,
}

impl Default for WlanSection {
    fn default() -> Self {
        Self {
            data_rate_mbps: 54.0,
            proc_rate: 10_000,
            edca: false,
            buffer_bits: 1_000_000,
            overhead_bytes: CALIBRATED_OVERHEAD_BYTES,
            mtu: 1500,
        }
    }
}

impl WlanSection {
    pub fn to_link(&self) -> WlanConfig {
        WlanConfig {
            data_rate_bps: (self.data_rate_mbps * 1e6).round() as u64,
            buffer_bits: self.buffer_bits,
            proc_rate: self.proc_rate,
            overhead_bytes: self.overhead_bytes,
            edca: self.edca,
            mtu: self.mtu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WimaxSection {
    pub max_sustained_mbps: f64,
    pub min_reserved_mbps: f64,
    pub buffer_bits: u64,
    pub overhead_bytes: u32,
    pub mtu: u32,
    pub qos_scope: QosScope,
    pub bucket_depth_ms: f64,
    /// Extra one-way delay for a promoted leader without its own adapter.
    pub backup_penalty_ms: f64,
}

impl Default for WimaxSection {
    fn default() -> Self {
        Self {
            max_sustained_mbps: 10.0,
            min_reserved_mbps: 5.0,
            buffer_bits: 1_000_000,
            overhead_bytes: 54,
            mtu: 1500,
            qos_scope: QosScope::PerServiceFlow,
            bucket_depth_ms: 100.0,
            backup_penalty_ms: 0.0,
        }
    }
}

impl WimaxSection {
    pub fn to_link(&self) -> WimaxConfig {
        WimaxConfig {
            max_sustained_bps: (self.max_sustained_mbps * 1e6).round() as u64,
            min_reserved_bps: (self.min_reserved_mbps * 1e6).round() as u64,
            buffer_bits: self.buffer_bits,
            overhead_bytes: self.overhead_bytes,
            mtu: self.mtu,
            qos_scope: self.qos_scope,
            bucket_depth_us: (self.bucket_depth_ms * 1000.0).round() as Micros,
            backup_penalty_us: (self.backup_penalty_ms * 1000.0).round() as Micros,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoSection {
    pub enabled: bool,
    pub bandwidth_mbps: f64,
    /// Admission limit; the capacity oracle decides when absent.
    pub max_calls: Option<u32>,
    /// Calls started regardless of case reports, staggered across one frame interval.
    pub forced_calls: u32,
    pub start_s: f64,
    pub call_duration_s: f64,
    pub frame_rate: u32,
}

impl Default for VideoSection {
    fn default() -> Self {
        Self {
            enabled: false,
            bandwidth_mbps: 2.0,
            max_calls: None,
            forced_calls: 0,
            start_s: 0.0,
            call_duration_s: 300.0,
            frame_rate: 30,
        }
    }
}

impl VideoSection {
    pub fn call_spec(&self) -> Result<VideoCallSpec, ConfigError> {
        let bps = (self.bandwidth_mbps * 1e6).round() as u64;
        let mut spec = VideoCallSpec::new(bps).map_err(|e| invalid("video.bandwidth_mbps", e.to_string()))?;
        spec.frame_rate = self.frame_rate;
        spec.duration = secs_to_micros(self.call_duration_s);
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPhase {
    /// Drones configured on the pad at the DMC; the mission flies out first.
    #[default]
    Preflight,
    /// Drones already landed at their first-session targets.
    Collecting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    pub start_phase: StartPhase,
    pub formation: Formation,
    pub spacing_m: f64,
    pub speed_kmh: f64,
    pub session_duration_s: f64,
    pub n_sessions: u32,
    pub reposition_time_s: f64,
    pub area_m: Pos,
    pub dmc_position: Pos,
    /// Distance flown east from the DMC to the center of the target area.
    pub dmc_distance_m: f64,
    /// Defaults to one target per slave drone.
    pub n_targets: Option<u32>,
    pub target_spacing_m: f64,
    pub backup_id: u8,
    pub launch_s: f64,
    /// Delay after a session ends before drones move on.
    pub report_s: f64,
    /// Standard deviation of the steering disturbance.
    pub position_noise_m: f64,
    /// Earliest classification inside a session.
    pub classify_after_s: f64,
}

impl Default for MissionSection {
    fn default() -> Self {
        let plan = MissionPlan::default();
        Self {
            start_phase: StartPhase::Preflight,
            formation: plan.formation,
            spacing_m: plan.spacing_m,
            speed_kmh: plan.speed_kmh,
            session_duration_s: plan.session_duration_s,
            n_sessions: plan.n_sessions,
            reposition_time_s: plan.reposition_time_s,
            area_m: plan.area,
            dmc_position: plan.dmc_position,
            dmc_distance_m: 1000.0,
            n_targets: None,
            target_spacing_m: 30.0,
            backup_id: 1,
            launch_s: 10.0,
            report_s: 1.0,
            position_noise_m: 0.0,
            classify_after_s: 60.0,
        }
    }
}

impl MissionSection {
    pub fn area_center(&self) -> Pos {
        self.dmc_position.add(self.dmc_distance_m, 0.0).clamp_to(self.area_m)
    }

    /// Targets on a square grid centered on the target area.
    pub fn target_positions(&self, n: u32) -> Vec<Pos> {
        let cols = (n as f64).sqrt().ceil().max(1.0) as u32;
        let mid = (cols - 1) as f64 / 2.0;
        let c = self.area_center();
        (0..n)
            .map(|k| {
                let (r, col) = ((k / cols) as f64, (k % cols) as f64);
                c.add(self.target_spacing_m * (col - mid), self.target_spacing_m * (r - mid))
                    .clamp_to(self.area_m)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PayloadSection {
    pub ld_status: LdStatusFormula,
    pub waypoint_bytes: u32,
}

impl Default for PayloadSection {
    fn default() -> Self {
        Self {
            ld_status: LdStatusFormula::default(),
            waypoint_bytes: DEFAULT_WAYPOINT_LEN,
        }
    }
}

/// One scripted failure. Leader kinds hit whichever drone leads at `at_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub kind: FailureKind,
    pub at_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drone: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    pub n_sds: u32,
    pub traffic_profile: u8,
    pub phasing: Phasing,
    pub infection_rate: f64,
    pub wlan: WlanSection,
    pub wimax: WimaxSection,
    pub video: VideoSection,
    pub mission: MissionSection,
    pub payload: PayloadSection,
    pub detection: DetectionConfig,
    pub thresholds: PredictionThresholds,
    pub failures: Vec<FailureSpec>,
    pub energy: DurabilityConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".to_string(),
            seed: 0,
            duration_s: 900.0,
            n_sds: 10,
            traffic_profile: 2,
            phasing: Phasing::Staggered,
            infection_rate: 0.025,
            wlan: WlanSection::default(),
            wimax: WimaxSection::default(),
            video: VideoSection::default(),
            mission: MissionSection::default(),
            payload: PayloadSection::default(),
            detection: DetectionConfig::default(),
            thresholds: PredictionThresholds::default(),
            failures: Vec::new(),
            energy: DurabilityConfig::default(),
        }
    }
}

pub const MAX_SDS_NO_VIDEO: u32 = 100;
pub const MAX_SDS_VIDEO: u32 = 14;

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn horizon(&self) -> Micros {
        secs_to_micros(self.duration_s)
    }

    pub fn n_targets(&self) -> u32 {
        self.mission.n_targets.unwrap_or(self.n_sds)
    }

    pub fn mission_plan(&self) -> MissionPlan {
        let m = &self.mission;
        MissionPlan {
            dmc_position: m.dmc_position,
            area: m.area_m,
            target_positions: m.target_positions(self.n_targets()),
            formation: m.formation,
            spacing_m: m.spacing_m,
            speed_kmh: m.speed_kmh,
            session_duration_s: m.session_duration_s,
            n_sessions: m.n_sessions,
            reposition_time_s: m.reposition_time_s,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("duration_s", self.duration_s)?;
        let max = if self.video.enabled { MAX_SDS_VIDEO } else { MAX_SDS_NO_VIDEO };
        if !(1..=max).contains(&self.n_sds) {
            let mode = if self.video.enabled { "with video" } else { "without video" };
            return Err(invalid("n_sds", format!("{} outside 1..={max} {mode}", self.n_sds)));
        }
        if !matches!(self.traffic_profile, 1 | 2) {
            return Err(invalid("traffic_profile", format!("{} is not 1 or 2", self.traffic_profile)));
        }
        if !(0.0..=1.0).contains(&self.infection_rate) {
            return Err(invalid("infection_rate", format!("{} outside [0, 1]", self.infection_rate)));
        }

        let w = &self.wlan;
        if !DATA_RATES_MBPS.iter().any(|&r| r as f64 == w.data_rate_mbps) {
            return Err(invalid(
                "wlan.data_rate_mbps",
                format!("{} is not one of {DATA_RATES_MBPS:?}", w.data_rate_mbps),
            ));
        }
        if w.proc_rate == 0 {
            return Err(invalid("wlan.proc_rate", "must be positive"));
        }
        if w.buffer_bits == 0 {
            return Err(invalid("wlan.buffer_bits", "must be positive"));
        }
        if w.mtu as usize <= HEADER_LEN {
            return Err(invalid("wlan.mtu", format!("must exceed the {HEADER_LEN}-byte header")));
        }
        let x = &self.wimax;
        positive("wimax.max_sustained_mbps", x.max_sustained_mbps)?;
        positive("wimax.min_reserved_mbps", x.min_reserved_mbps)?;
        if x.min_reserved_mbps > x.max_sustained_mbps {
            return Err(invalid("wimax.min_reserved_mbps", "exceeds max_sustained_mbps"));
        }
        positive("wimax.bucket_depth_ms", x.bucket_depth_ms)?;
        non_negative("wimax.backup_penalty_ms", x.backup_penalty_ms)?;
        if x.buffer_bits == 0 {
            return Err(invalid("wimax.buffer_bits", "must be positive"));
        }
        if x.mtu != w.mtu {
            return Err(invalid("wimax.mtu", format!("{} differs from wlan.mtu {}", x.mtu, w.mtu)));
        }

        let v = &self.video;
        if v.enabled {
            if self.traffic_profile != 2 {
                return Err(invalid("video.enabled", "video calls need traffic_profile 2"));
            }
            if v.frame_rate == 0 {
                return Err(invalid("video.frame_rate", "must be positive"));
            }
            positive("video.call_duration_s", v.call_duration_s)?;
            non_negative("video.start_s", v.start_s)?;
            v.call_spec()?;
            if v.forced_calls > self.n_sds {
                return Err(invalid(
                    "video.forced_calls",
                    format!("{} exceeds n_sds {}", v.forced_calls, self.n_sds),
                ));
            }
        } else if v.forced_calls > 0 {
            return Err(invalid("video.forced_calls", "video is disabled"));
        }

        let m = &self.mission;
        positive("mission.spacing_m", m.spacing_m)?;
        positive("mission.speed_kmh", m.speed_kmh)?;
        positive("mission.session_duration_s", m.session_duration_s)?;
        positive("mission.area_m.x", m.area_m.x)?;
        positive("mission.area_m.y", m.area_m.y)?;
        non_negative("mission.reposition_time_s", m.reposition_time_s)?;
        non_negative("mission.dmc_distance_m", m.dmc_distance_m)?;
        non_negative("mission.target_spacing_m", m.target_spacing_m)?;
        non_negative("mission.launch_s", m.launch_s)?;
        non_negative("mission.report_s", m.report_s)?;
        non_negative("mission.position_noise_m", m.position_noise_m)?;
        non_negative("mission.classify_after_s", m.classify_after_s)?;
        if m.n_sessions == 0 {
            return Err(invalid("mission.n_sessions", "must be positive"));
        }
        if m.backup_id == 0 || m.backup_id as u32 > self.n_sds {
            return Err(invalid("mission.backup_id", format!("{} is not a slave drone id", m.backup_id)));
        }
        let targets = self.n_targets() as u64;
        if targets > self.n_sds as u64 * m.n_sessions as u64 {
            return Err(invalid(
                "mission.n_targets",
                format!("{targets} targets exceed n_sds x n_sessions"),
            ));
        }
        if self.payload.waypoint_bytes == 0 {
            return Err(invalid("payload.waypoint_bytes", "must be positive"));
        }
        if self.payload.ld_status.length(self.n_sds).unwrap_or(0) == 0 {
            return Err(invalid("payload.ld_status", "length must be positive"));
        }
        if self.detection.flight_missed_broadcasts == 0 {
            return Err(invalid("detection.flight_missed_broadcasts", "must be positive"));
        }
        if self.detection.collection_missed_periods == 0 {
            return Err(invalid("detection.collection_missed_periods", "must be positive"));
        }

        for (i, f) in self.failures.iter().enumerate() {
            let field = |name: &str| format!("failures[{i}].{name}");
            non_negative(&field("at_s"), f.at_s)?;
            if f.at_s > self.duration_s {
                return Err(invalid(&field("at_s"), format!("{} is after duration_s", f.at_s)));
            }
            match (f.kind, f.drone) {
                (FailureKind::SdSudden, None) => {
                    return Err(invalid(&field("drone"), "sd_sudden needs a drone id"));
                }
                (FailureKind::SdSudden, Some(d)) if d == 0 || d as u32 > self.n_sds => {
                    return Err(invalid(&field("drone"), format!("{d} is not a slave drone id")));
                }
                (FailureKind::LdSudden | FailureKind::LdPredicted, Some(_)) => {
                    return Err(invalid(&field("drone"), "leader failures hit the acting leader"));
                }
                _ => {}
            }
        }
        durability_report(&self.energy).map_err(|e| invalid("energy", e.to_string()))?;
        Ok(())
    }

    pub fn backup_id(&self) -> NodeId {
        NodeId(self.mission.backup_id)
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Pretty JSON of the full config, every default spelled out.
pub fn config_echo(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

/// Returns `base` with the dotted field `axis` set to `value`, revalidated.
/// Only existing numeric, boolean or string leaves can be swept.
pub fn with_axis(base: &ScenarioConfig, axis: &str, value: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut doc = serde_json::to_value(base).expect("config serializes");
    let mut slot = &mut doc;
    for part in axis.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| ConfigError::NotSweepable(axis.to_string()))?;
    }
    let parsed = match slot {
        serde_json::Value::Number(_) | serde_json::Value::Bool(_) => serde_json::from_str(value.trim())
            .map_err(|_| invalid(axis, format!("{value:?} is not a valid value")))?,
        serde_json::Value::String(_) => serde_json::Value::String(value.trim().to_string()),
        serde_json::Value::Null if axis == "video.max_calls" || axis == "mission.n_targets" => {
            serde_json::from_str(value.trim()).map_err(|_| invalid(axis, format!("{value:?} is not a number")))?
        }
        _ => return Err(ConfigError::NotSweepable(axis.to_string())),
    };
    *slot = parsed;
    let cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| invalid(axis, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(r#"{"seed": 7, "n_sds": 3}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.n_sds, 3);
        assert_eq!(c.duration_s, 900.0);
        assert_eq!(c.wlan.data_rate_mbps, 54.0);
        assert_eq!(c.wlan.proc_rate, 10_000);
        assert_eq!(c.wimax.max_sustained_mbps, 10.0);
        assert_eq!(c.infection_rate, 0.025);
    }

    #[test]
    fn video_range_is_enforced() {
        let err = parse_config(r#"{"n_sds": 200, "video": {"enabled": true}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "n_sds"), "{err}");
        let err = parse_config(r#"{"n_sds": 5, "video": {"enabled": true, "bandwidth_mbps": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("video.bandwidth_mbps"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_config("{\n  \"seed\": 1,\n  \"n_sds\": ,\n}").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
        let err = parse_config("{\n\"sede\": 1}").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
        assert!(err.to_string().contains("sede"));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = ScenarioConfig::default();
        c.failures.push(FailureSpec {
            kind: FailureKind::SdSudden,
            at_s: 12.5,
            drone: Some(2),
        });
        assert_eq!(parse_config(&config_echo(&c)).unwrap(), c);
    }

    #[test]
    fn axis_edits() {
        let base = ScenarioConfig::default();
        assert_eq!(with_axis(&base, "wlan.data_rate_mbps", "18").unwrap().wlan.data_rate_mbps, 18.0);
        assert_eq!(with_axis(&base, "n_sds", "100").unwrap().n_sds, 100);
        assert!(with_axis(&base, "wlan.edca", "true").unwrap().wlan.edca);
        assert_eq!(
            with_axis(&base, "mission.formation", "grid").unwrap().mission.formation,
            Formation::Grid
        );
        assert!(matches!(with_axis(&base, "wlan", "1"), Err(ConfigError::NotSweepable(_))));
        assert!(matches!(with_axis(&base, "wlan.nope", "1"), Err(ConfigError::NotSweepable(_))));
        assert!(with_axis(&base, "wlan.data_rate_mbps", "20").is_err());
    }
}
