use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use swarmsim::energy::durability_report;
use swarmsim::runner::{
    config_echo, csv_string, durability_csv, load_config, preset, report_string, run_scenario, sweep,
    ConfigError, RunError, RunResult, ScenarioConfig, PRESETS,
};

#[derive(Parser)]
#[command(name = "swarmsim", version, about = "UAV swarm data-collection simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario. CONFIG is a JSON file or a bundled preset name.
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario per value of a config field.
    Sweep {
        config: String,
        /// Dotted field path, e.g. wlan.data_rate_mbps
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the battery durability table for the config's energy section.
    Energy { config: String },
    /// List the bundled scenario configs.
    Presets,
}

const EXIT_INVALID: u8 = 1;
const EXIT_ABORT: u8 = 2;

fn load(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    if !Path::new(arg).exists() {
        if let Some(p) = preset(arg) {
            return p;
        }
    }
    load_config(arg)
}

fn write_outputs(dir: &Path, results: &[RunResult]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), csv_string(results))?;
    std::fs::write(dir.join("report.txt"), report_string(results))?;
    for r in results {
        std::fs::write(dir.join(format!("{}.config.json", r.run_id)), config_echo(&r.config))?;
    }
    Ok(())
}

fn finish(results: &[RunResult], out: Option<&Path>) -> ExitCode {
    match out {
        Some(dir) => {
            if let Err(e) = write_outputs(dir, results) {
                eprintln!("error: cannot write to {}: {e}", dir.display());
                return ExitCode::from(EXIT_INVALID);
            }
            print!("{}", report_string(results));
        }
        None => print!("{}", csv_string(results)),
    }
    if results.iter().any(|r| r.aborted) {
        eprintln!("mission aborted");
        return ExitCode::from(EXIT_ABORT);
    }
    ExitCode::SUCCESS
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_INVALID)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, seed, out } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match run_scenario(&cfg) {
                Ok(r) => finish(&[r], out.as_deref()),
                Err(e) => fail(e),
            }
        }
        Cmd::Sweep { config, axis, values, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match sweep(&cfg, &axis, &values) {
                Ok(rs) if rs.is_empty() => ExitCode::SUCCESS,
                Ok(rs) => finish(&rs, out.as_deref()),
                Err(e @ RunError::Config(_)) => fail(e),
                Err(e) => fail(e),
            }
        }
        Cmd::Energy { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match durability_report(&cfg.energy) {
                Ok(rep) => {
                    print!("{rep}\n{}", durability_csv(&rep));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Cmd::Presets => {
            for (name, text) in PRESETS {
                let desc = preset(name)
                    .and_then(Result::ok)
                    .map(|c| {
                        format!(
                            "n_sds={} profile={} video={} edca={} start={:?} failures={}",
                            c.n_sds,
                            c.traffic_profile,
                            if c.video.enabled { format!("{}Mbps", c.video.bandwidth_mbps) } else { "off".into() },
                            c.wlan.edca,
                            c.mission.start_phase,
                            c.failures.len()
                        )
                    })
                    .unwrap_or_else(|| format!("invalid preset ({} bytes)", text.len()));
                println!("{name:<18} {desc}");
            }
            ExitCode::SUCCESS
        }
    }
}
