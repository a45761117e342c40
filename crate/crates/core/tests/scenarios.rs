use swarmsim::failure::{FailureKind, HandoverKind};
use swarmsim::netsim::{LinkId, TrafficMode};
use swarmsim::runner::{preset, run_scenario, FailureSpec, RunResult, ScenarioConfig, StartPhase};
use swarmsim::swarm::PhaseState;
use swarmsim::NodeId;

fn load(name: &str) -> ScenarioConfig {
    preset(name).unwrap().unwrap()
}

fn run(cfg: &ScenarioConfig) -> RunResult {
    run_scenario(cfg).unwrap()
}

fn trace(r: &RunResult, id: u8) -> &[PhaseState] {
    &r.phase_traces[&NodeId(id)]
}

#[test]
fn mission_preset_flies_collects_and_lands() {
    let r = run(&load("mission"));
    assert!(r.mission_complete && !r.aborted);
    assert_eq!(r.collected_targets.len(), r.planned_targets.len());
    for mode in [TrafficMode::Ground, TrafficMode::Flight, TrafficMode::Collection] {
        assert!(r.metrics.mode_time.get(&mode).copied().unwrap_or(0) > 0, "{mode:?}");
    }
    let leader = trace(&r, 0);
    for p in [PhaseState::Launching, PhaseState::InFormation, PhaseState::Transit, PhaseState::Returning] {
        assert!(leader.contains(&p), "leader never {p:?}");
    }
    assert_eq!(leader.last(), Some(&PhaseState::Landed));
    assert_eq!(trace(&r, 4).last(), Some(&PhaseState::Isolated));
    assert!(r.energy[&NodeId(0)].rotor_wh() > 0.0);
    assert!(r.energy[&NodeId(1)].compute_wh() > 0.0);
}

#[test]
fn collection_start_keeps_rotors_idle() {
    let r = run(&load("scenario1"));
    assert!(r.energy.values().all(|l| l.rotor_wh() == 0.0));
    assert!(r.energy.values().all(|l| l.compute_wh() > 0.0));
    assert_eq!(r.metrics.mode_time.keys().copied().collect::<Vec<_>>(), vec![TrafficMode::Collection]);
}

#[test]
fn hard_handover_promotes_backup_and_loses_aggregate() {
    let r = run(&load("failover"));
    assert_eq!(r.handovers.len(), 1);
    let h = &r.handovers[0];
    assert_eq!(h.kind, HandoverKind::Hard);
    assert_eq!((h.old, h.new), (NodeId(0), NodeId(1)));
    assert_eq!(h.new_backup, Some(NodeId(2)));
    assert_eq!(trace(&r, 0).last(), Some(&PhaseState::Isolated));
    let rec = r.metrics.recovery_times[0];
    assert!(rec <= 60_000_000, "collection-mode detection took {rec} us");
}

fn soft_handover_run(dmc_distance_m: f64) -> RunResult {
    let mut cfg = load("scenario1");
    cfg.traffic_profile = 2;
    cfg.mission.dmc_distance_m = dmc_distance_m;
    cfg.failures = vec![FailureSpec {
        kind: FailureKind::LdPredicted,
        at_s: 200.0,
        drone: None,
    }];
    let r = run(&cfg);
    let h = &r.handovers[0];
    assert_eq!(h.kind, HandoverKind::Soft);
    assert_eq!(h.lost_aggregate, 0);
    assert!(r.metrics.recovery_times.is_empty());
    assert_eq!(r.metrics.counter("false_detections"), 0);
    r
}

#[test]
fn soft_handover_sends_old_leader_home_when_in_range() {
    let r = soft_handover_run(300.0);
    let old = trace(&r, 0);
    assert!(old.contains(&PhaseState::Returning), "{old:?}");
    assert_eq!(old.last(), Some(&PhaseState::Landed));
}

#[test]
fn soft_handover_lands_old_leader_in_place_when_out_of_range() {
    let r = soft_handover_run(1000.0);
    let old = trace(&r, 0);
    assert!(!old.contains(&PhaseState::Returning), "{old:?}");
    assert_eq!(old.last(), Some(&PhaseState::Isolated));
    assert!(r.deviations.iter().any(|d| d.contains("landed in place")));
}

#[test]
fn slave_failure_is_isolated_and_its_target_reassigned() {
    let mut cfg = ScenarioConfig {
        n_sds: 4,
        duration_s: 1200.0,
        ..ScenarioConfig::default()
    };
    cfg.mission.start_phase = StartPhase::Collecting;
    cfg.mission.n_targets = Some(5);
    cfg.mission.n_sessions = 2;
    cfg.mission.session_duration_s = 200.0;
    cfg.failures = vec![FailureSpec {
        kind: FailureKind::SdSudden,
        at_s: 20.0,
        drone: Some(3),
    }];
    let r = run(&cfg);
    assert_eq!(trace(&r, 3).last(), Some(&PhaseState::Isolated));
    assert_eq!(r.collected_targets, r.planned_targets);
    assert!(r.mission_complete);
    assert!(r.metrics.link(LinkId::Wlan).is_conserved());
}

#[test]
fn video_calls_respect_admission_limit() {
    let mut cfg = load("scenario2_4mbps");
    cfg.duration_s = 120.0;
    cfg.video.forced_calls = 10;
    let r = run(&cfg);
    assert_eq!(r.max_calls, 6);
    assert_eq!(r.calls.iter().filter(|c| c.forced).count(), 6);
    assert!(r.metrics.counter("calls_rejected") >= 4);
}
