use proptest::prelude::*;
use swarmsim::energy::{
    battery_feasible, derate_flight_time, payload_ratio, rotor_energy, total_flight_time, BatteryPlan,
    ComputeRadioPower, DeratingCurve, DroneSpec, PowerRole,
};
use swarmsim::failure::FailureKind;
use swarmsim::netsim::{
    simulate_wimax_trace, simulate_wlan_trace, FlowDir, MetricsRecord, TraceArrival, WimaxConfig, WlanConfig,
};
use swarmsim::protocol::{
    decode_message, encode_message, first_send_offset, fragment_payload, generate_profile_traffic, Message,
    MessageKind, PayloadRules, Phasing, TrafficProfile, VideoCallSpec, Window, HEADER_LEN,
};
use swarmsim::runner::{csv_string, run_scenario, FailureSpec, RunResult, ScenarioConfig, StartPhase};
use swarmsim::NodeId;

fn kind() -> impl Strategy<Value = MessageKind> {
    prop::sample::select(MessageKind::ALL.to_vec())
}

fn trace(max_len: usize) -> impl Strategy<Value = Vec<TraceArrival>> {
    prop::collection::vec((0u64..2_000, 9u32..=1500, kind()), 1..max_len).prop_map(|v| {
        let mut t = 0;
        v.into_iter()
            .map(|(gap, wire_bytes, kind)| {
                t += gap;
                TraceArrival { at: t, wire_bytes, kind }
            })
            .collect()
    })
}

fn small_scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        any::<u64>(),
        1u32..=20,
        1u8..=2,
        30.0f64..120.0,
        any::<bool>(),
        prop::option::of(5.0f64..25.0),
    )
        .prop_map(|(seed, n_sds, profile, duration_s, collecting, ld_kill)| {
            let mut c = ScenarioConfig {
                name: "prop".into(),
                seed,
                n_sds,
                traffic_profile: profile,
                duration_s,
                ..ScenarioConfig::default()
            };
            if collecting {
                c.mission.start_phase = StartPhase::Collecting;
            }
            if let Some(at_s) = ld_kill {
                c.failures.push(FailureSpec {
                    kind: FailureKind::LdSudden,
                    at_s,
                    drone: None,
                });
            }
            c
        })
}

fn run(cfg: &ScenarioConfig) -> RunResult {
    run_scenario(cfg).expect("valid scenario")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn codec_round_trip(k in kind(), src in any::<u8>(), dst in any::<u8>(), seq in any::<u32>(), n in 1u32..=100) {
        let rules = PayloadRules::new(n).with_video(&VideoCallSpec::new(4_000_000).unwrap());
        let m = Message::new(k, NodeId(src), NodeId(dst), &rules, seq, 0).unwrap();
        let bytes = encode_message(&m, &rules).unwrap();
        prop_assert_eq!(bytes.len(), HEADER_LEN + m.payload_len as usize);
        prop_assert_eq!(decode_message(&bytes, &rules).unwrap(), m);
    }

    #[test]
    fn truncated_bytes_never_decode(k in kind(), cut in 1usize..8) {
        let rules = PayloadRules::new(10).with_video(&VideoCallSpec::new(2_000_000).unwrap());
        let m = Message::new(k, NodeId(1), NodeId(0), &rules, 7, 0).unwrap();
        let bytes = encode_message(&m, &rules).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_message(&bytes[..keep], &rules).is_err());
    }

    #[test]
    fn fragments_cover_payload(size in 0u32..200_000, mtu in 9u32..=9000) {
        let f = fragment_payload(size, mtu).unwrap();
        let chunk = mtu - HEADER_LEN as u32;
        prop_assert_eq!(f.iter().map(|&x| x as u64).sum::<u64>(), size as u64);
        prop_assert_eq!(f.len() as u32, size.div_ceil(chunk));
        prop_assert!(f.iter().all(|&x| x > 0 && x <= chunk));
    }

    #[test]
    fn first_send_within_period(period in 1u64..100_000_000, count in 1usize..200, stagger in any::<bool>()) {
        let phasing = if stagger { Phasing::Staggered } else { Phasing::Aligned };
        for i in 0..count {
            let off = first_send_offset(period, i, count, phasing);
            prop_assert!(off > 0 && off <= period);
        }
    }

    #[test]
    fn periodic_counts_match_window(n in 1u32..=30, secs in 1u64..600, stagger in any::<bool>()) {
        let phasing = if stagger { Phasing::Staggered } else { Phasing::Aligned };
        let rules = PayloadRules::new(n);
        let profile = TrafficProfile::from_id(2).unwrap().with_flight_mode();
        let window = Window::new(0, secs * 1_000_000).unwrap();
        let ev = generate_profile_traffic(&profile, &rules, window, phasing).unwrap();
        let count = |k: MessageKind| ev.iter().filter(|e| e.message.kind == k).count() as u64;
        let t = secs * 1_000_000;
        let sends = |period: u64, sources: usize| -> u64 {
            (0..sources)
                .map(|i| {
                    let off = first_send_offset(period, i, sources, phasing);
                    if off > t { 0 } else { (t - off) / period + 1 }
                })
                .sum()
        };
        let sd = count(MessageKind::StatusReportSd);
        prop_assert_eq!(sd, sends(10_000_000, n as usize));
        prop_assert!(sd >= n as u64 * (secs / 10) && sd <= n as u64 * (secs / 10 + 1));
        if !stagger {
            prop_assert_eq!(sd, n as u64 * (secs / 10));
        }
        prop_assert_eq!(count(MessageKind::StatusReportLd), secs / 30);
        prop_assert_eq!(count(MessageKind::MoveToWaypoint), secs * 5);
        prop_assert_eq!(count(MessageKind::Ack), n as u64 * secs * 5 + sd + secs / 30);
    }

    #[test]
    fn wlan_trace_conserves(t in trace(300), edca in any::<bool>(), buffer in 20_000u64..2_000_000) {
        let cfg = WlanConfig { edca, buffer_bits: buffer, ..WlanConfig::default() };
        let r = simulate_wlan_trace(&cfg, &t);
        prop_assert!(r.stats.is_conserved());
        prop_assert_eq!(r.stats.offered_packets, t.len() as u64);
        let delivered = r.latencies.iter().flatten().count() as u64;
        prop_assert_eq!(delivered, r.stats.delivered_packets);
        for (a, l) in t.iter().zip(&r.latencies) {
            if let Some(l) = l {
                prop_assert!(*l >= cfg.tx_time(a.wire_bytes) + cfg.proc_time());
            }
        }
    }

    #[test]
    fn wimax_trace_conserves_and_respects_rate(t in trace(300)) {
        let cfg = WimaxConfig::default();
        let r = simulate_wimax_trace(&cfg, &t);
        prop_assert!(r.stats.is_conserved());
        prop_assert_eq!(r.stats.offered_packets, t.len() as u64);
        let last = t.last().unwrap().at;
        let span = last + r.latencies.iter().flatten().max().copied().unwrap_or(0);
        let bucket = cfg.max_sustained_bps * cfg.bucket_depth_us / 1_000_000;
        let allowed = cfg.max_sustained_bps as u128 * span as u128 / 1_000_000 + bucket as u128 + 1;
        prop_assert!(r.stats.delivered_bits as u128 <= allowed);
    }

    #[test]
    fn wlan_frames_outweigh_wimax_frames(wire in 1u32..=1500) {
        let wimax = WimaxConfig::default();
        for overhead in [90, WlanConfig::default().overhead_bytes] {
            let wlan = WlanConfig { overhead_bytes: overhead, ..WlanConfig::default() };
            prop_assert!(wlan.frame_bits(wire) > wimax.frame_bits(wire));
        }
    }

    #[test]
    fn payload_ratio_is_linear(g in 0.0f64..2000.0, w in 1.0f64..5000.0, k in 0.1f64..10.0) {
        let r = payload_ratio(g, w).unwrap();
        prop_assert!((payload_ratio(k * g, w).unwrap() - k * r).abs() <= 1e-9 * (1.0 + k * r));
        prop_assert!((payload_ratio(k * g, k * w).unwrap() - r).abs() <= 1e-9 * (1.0 + r));
    }

    #[test]
    fn derating_never_increases(a in 0.0f64..60.0, b in 0.0f64..60.0) {
        let c = DeratingCurve::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(derate_flight_time(30.0, lo, &c) >= derate_flight_time(30.0, hi, &c));
        prop_assert_eq!(derate_flight_time(30.0, 0.0, &c), 30.0);
    }

    #[test]
    fn max_sessions_is_tight(leg in 0.5f64..9.0, repo in 0.2f64..3.0, pct in 0.0f64..30.0) {
        let (spec, curve) = (DroneSpec::default(), DeratingCurve::default());
        let plan = BatteryPlan { dmc_leg_min: leg, reposition_min: repo, ..BatteryPlan::default() };
        let f = battery_feasible(&plan, &spec, pct, &curve, &ComputeRadioPower::default(), PowerRole::Sd);
        let n = f.flight_battery_sessions;
        prop_assume!(n < 10_000);
        if 2.0 * leg <= derate_flight_time(30.0, pct, &curve) {
            let e = rotor_energy(total_flight_time(leg, n, repo), &spec, pct, &curve);
            prop_assert!(e <= spec.battery_capacity_wh * (1.0 + 1e-9));
        }
        let over = rotor_energy(total_flight_time(leg, n + 1, repo), &spec, pct, &curve);
        prop_assert!(over > spec.battery_capacity_wh);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenario_invariants(cfg in small_scenario()) {
        let a = run(&cfg);
        prop_assert!(a.metrics.conserved());
        for (mode, dir) in a.metrics.flows.keys() {
            if *dir == FlowDir::SdToLd {
                let per_sd: u64 = a.metrics.sd_uplink_bits.iter().filter(|((m, _), _)| m == mode).map(|(_, b)| b).sum();
                prop_assert_eq!(per_sd, a.metrics.flows[&(*mode, *dir)].bits);
            }
        }
        let mode_total: u64 = a.metrics.mode_time.values().sum();
        prop_assert_eq!(mode_total, a.metrics.elapsed);
        for l in a.energy.values() {
            prop_assert!((l.total_wh() - (l.rotor_wh() + l.compute_wh())).abs() < 1e-9);
        }
        let b = run(&cfg);
        prop_assert_eq!(csv_string(std::slice::from_ref(&a)), csv_string(std::slice::from_ref(&b)));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metric_merge_is_commutative_and_associative(s in any::<u64>()) {
        let rec = |seed: u64, n: u32| {
            let cfg = ScenarioConfig { seed, n_sds: n, duration_s: 40.0, ..ScenarioConfig::default() };
            let mut m = run(&cfg).metrics;
            m.normalize();
            m
        };
        let (a, b, c) = (rec(s, 2), rec(s ^ 1, 5), rec(s ^ 2, 3));
        let empty = MetricsRecord::default();
        prop_assert_eq!(a.merge(&b), b.merge(&a));
        prop_assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        prop_assert_eq!(a.merge(&empty), a.clone());
    }
}
