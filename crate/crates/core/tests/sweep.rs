use swarmsim::netsim::LinkId;
use swarmsim::runner::{csv_string, preset, run_scenario, sweep, sweep_configs, RunError, ScenarioConfig};

fn base() -> ScenarioConfig {
    let mut c = preset("scenario1").unwrap().unwrap();
    c.duration_s = 300.0;
    c
}

fn values(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn p50_falls_as_data_rate_rises() {
    let rs = sweep(&base(), "wlan.data_rate_mbps", &values(&["6", "12", "24", "36", "54"])).unwrap();
    let p50: Vec<u64> = rs
        .iter()
        .map(|r| r.metrics.link(LinkId::Wlan).latency_summary(None).unwrap().p50)
        .collect();
    assert!(p50.windows(2).all(|w| w[1] <= w[0]), "{p50:?}");
    assert!(p50[0] > p50[4]);
}

#[test]
fn p50_falls_as_proc_rate_rises() {
    let rs = sweep(&base(), "wlan.proc_rate", &values(&["5000", "10000", "20000"])).unwrap();
    let p50: Vec<u64> = rs
        .iter()
        .map(|r| r.metrics.link(LinkId::Wlan).latency_summary(None).unwrap().p50)
        .collect();
    assert!(p50.windows(2).all(|w| w[1] <= w[0]), "{p50:?}");
}

#[test]
fn status_traffic_is_lossless_at_every_swarm_size() {
    let rs = sweep(&base(), "n_sds", &values(&["1", "5", "25", "50", "100"])).unwrap();
    for r in &rs {
        for l in r.metrics.links.values() {
            assert_eq!(l.dropped_packets, 0, "{}", r.run_id);
        }
    }
}

#[test]
fn empty_value_list_is_empty_sweep() {
    assert!(sweep(&base(), "n_sds", &[]).unwrap().is_empty());
}

#[test]
fn sweep_point_equals_standalone_run() {
    let vals = values(&["4", "7"]);
    let rs = sweep(&base(), "n_sds", &vals).unwrap();
    let cfgs = sweep_configs(&base(), "n_sds", &vals).unwrap();
    for (r, c) in rs.iter().zip(&cfgs) {
        let alone = run_scenario(c).unwrap();
        assert_eq!(csv_string(&[alone]), csv_string(std::slice::from_ref(r)));
    }
    assert_eq!(cfgs[1].seed, base().seed + 1);
    assert_eq!(cfgs[0].n_sds, 4);
}

#[test]
fn bad_axis_or_value_is_rejected() {
    assert!(matches!(sweep(&base(), "wlan.nope", &values(&["1"])), Err(RunError::Config(_))));
    assert!(matches!(sweep(&base(), "n_sds", &values(&["0"])), Err(RunError::Config(_))));
    assert!(matches!(sweep(&base(), "n_sds", &values(&["many"])), Err(RunError::Config(_))));
}
