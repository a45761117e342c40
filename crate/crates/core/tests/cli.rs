use std::path::Path;
use std::process::{Command, Output};

fn swarmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn presets_are_listed() {
    let o = swarmsim(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["scenario1", "scenario2_2mbps", "scenario3_edca", "failover", "mission"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(!text.contains("invalid"));
}

#[test]
fn run_writes_csv_report_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{ "name": "cli", "duration_s": 30, "n_sds": 3 }"#);
    let out = dir.path().join("out");
    let o = swarmsim(&["run", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("run_id,seed,link,metric,class,value,unit\n"));
    assert!(csv.lines().skip(1).all(|l| l.starts_with("cli-s9,9,")));
    assert!(out.join("report.txt").exists());
    let echo = std::fs::read_to_string(out.join("cli-s9.config.json")).unwrap();
    assert!(echo.contains("\"seed\": 9"));

    let replay = swarmsim(&["run", out.join("cli-s9.config.json").to_str().unwrap()]);
    assert!(replay.status.success());
    assert_eq!(String::from_utf8(replay.stdout).unwrap(), csv);
}

#[test]
fn stdout_csv_is_deterministic() {
    let a = swarmsim(&["run", "failover", "--seed", "3"]);
    let b = swarmsim(&["run", "failover", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validation_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{ "n_sds": 15, "traffic_profile": 2, "video": { "enabled": true } }"#);
    let o = swarmsim(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_sds"), "{}", stderr(&o));

    let cfg = write(dir.path(), "d.json", "{\n  \"seed\": 1,\n  \"wlan\": { \"data_rat\": 54 }\n}\n");
    let o = swarmsim(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("data_rat"), "{e}");

    let o = swarmsim(&["run", "no-such-file.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mission_abort_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "n_sds": 1, "duration_s": 60, "mission": { "start_phase": "collecting" },
             "failures": [ { "kind": "sd_sudden", "at_s": 3, "drone": 1 }, { "kind": "ld_sudden", "at_s": 5 } ] }"#,
    );
    let o = swarmsim(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.contains(",run,aborted,,1,flag"));
}

#[test]
fn sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = swarmsim(&[
        "sweep", "scenario1", "--axis", "wlan.proc_rate", "--values", "5000,10000,20000", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    for v in ["5000", "10000", "20000"] {
        assert!(csv.contains(&format!("scenario1.wlan.proc_rate={v}-s")));
    }
    let o = swarmsim(&["sweep", "scenario1", "--axis", "wlan.bogus", "--values", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn energy_prints_durability_table() {
    let o = swarmsim(&["energy", "scenario1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("battery,max_sessions,max_hours"));
    assert!(text.contains("Raspberry Pi Battery (SD),15,7.5"));
    assert!(text.contains("System limit: 6 h"));
}
