use super::config::{with_axis, ScenarioConfig};
use super::sim::{run_scenario, RunError, RunResult};
use rayon::prelude::*;

/// The configs a sweep runs: `axis` set to each value in turn, seed
/// `base.seed + index`, name suffixed with the point.
pub fn sweep_configs(base: &ScenarioConfig, axis: &str, values: &[String]) -> Result<Vec<ScenarioConfig>, RunError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = with_axis(base, axis, v)?;
            cfg.seed = base.seed.wrapping_add(i as u64);
            cfg.name = format!("{}.{}={}", base.name, axis, v.trim());
            Ok(cfg)
        })
        .collect()
}

/// One run per value, in the order given. Points run in parallel.
pub fn sweep(base: &ScenarioConfig, axis: &str, values: &[String]) -> Result<Vec<RunResult>, RunError> {
    let configs = sweep_configs(base, axis, values)?;
    configs.par_iter().map(run_scenario).collect()
}
