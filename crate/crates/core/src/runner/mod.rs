//! Scenario configs, end-to-end runs, sweeps and result emission.

mod config;
mod output;
mod sim;
mod sweep;

pub use config::{
    config_echo, load_config, parse_config, with_axis, ConfigError, FailureSpec, MissionSection,
    PayloadSection, ScenarioConfig, StartPhase, VideoSection, WimaxSection, WlanSection,
    MAX_SDS_NO_VIDEO, MAX_SDS_VIDEO,
};
pub use output::{
    csv_rows, csv_string, durability_csv, emit_csv, emit_report, report_string, write_csv, CsvRow,
    EmitError, CSV_HEADER,
};
pub use sim::{run_scenario, CallRecord, RunError, RunResult};
pub use sweep::{sweep, sweep_configs};

/// Bundled scenario configs as `(name, json)`.
pub const PRESETS: [(&str, &str); 8] = [
    ("scenario1", include_str!("../../presets/scenario1.json")),
    ("scenario2_2mbps", include_str!("../../presets/scenario2_2mbps.json")),
    ("scenario2_4mbps", include_str!("../../presets/scenario2_4mbps.json")),
    ("scenario2_6mbps", include_str!("../../presets/scenario2_6mbps.json")),
    ("scenario3_edca", include_str!("../../presets/scenario3_edca.json")),
    ("flight", include_str!("../../presets/flight.json")),
    ("failover", include_str!("../../presets/failover.json")),
    ("mission", include_str!("../../presets/mission.json")),
];

pub fn preset(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_config(text))
}
