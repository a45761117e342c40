use super::sim::RunResult;
use crate::energy::DurabilityReport;
use crate::netsim::{FlowDir, LatencySummary, LinkStats, Samples, TrafficMode};
use crate::protocol::AccessClass;
use crate::micros_to_secs;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("nothing to emit: no results")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const CSV_HEADER: [&str; 7] = ["run_id", "seed", "link", "metric", "class", "value", "unit"];

/// One metrics row; `class` is an access class, a node, or empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub link: String,
    pub metric: String,
    pub class: String,
    pub value: String,
    pub unit: &'static str,
}

fn row(link: &str, metric: impl Into<String>, class: impl Into<String>, value: impl ToString, unit: &'static str) -> CsvRow {
    CsvRow {
        link: link.to_string(),
        metric: metric.into(),
        class: class.into(),
        value: value.to_string(),
        unit,
    }
}

fn latency_rows(out: &mut Vec<CsvRow>, link: &str, by_class: &BTreeMap<AccessClass, Samples>) {
    let mut groups: Vec<(&str, Option<LatencySummary>)> = vec![("all", LatencySummary::of(by_class.values()))];
    for c in AccessClass::ALL {
        groups.push((c.name(), LatencySummary::of(by_class.get(&c))));
    }
    for (class, s) in groups {
        let Some(s) = s else { continue };
        out.push(row(link, "latency_count", class, s.count, "count"));
        out.push(row(link, "latency_mean", class, s.mean, "us"));
        out.push(row(link, "latency_p50", class, s.p50, "us"));
        out.push(row(link, "latency_p95", class, s.p95, "us"));
        out.push(row(link, "latency_p99", class, s.p99, "us"));
        out.push(row(link, "latency_max", class, s.max, "us"));
    }
}

fn link_rows(out: &mut Vec<CsvRow>, link: &str, l: &LinkStats, elapsed_s: f64) {
    out.push(row(link, "offered_packets", "", l.offered_packets, "count"));
    out.push(row(link, "delivered_packets", "", l.delivered_packets, "count"));
    out.push(row(link, "dropped_packets", "", l.dropped_packets, "count"));
    out.push(row(link, "offered_bits", "", l.offered_bits, "bit"));
    out.push(row(link, "delivered_bits", "", l.delivered_bits, "bit"));
    out.push(row(link, "dropped_bits", "", l.dropped_bits, "bit"));
    out.push(row(link, "loss_ratio", "", l.loss_ratio(), "ratio"));
    let tput = if elapsed_s > 0.0 { l.delivered_bits as f64 / elapsed_s } else { 0.0 };
    out.push(row(link, "throughput", "", tput, "bps"));
    latency_rows(out, link, &l.latency);
}

/// Every metric of one run, in a fixed order.
pub fn csv_rows(r: &RunResult) -> Vec<CsvRow> {
    let m = &r.metrics;
    let elapsed_s = micros_to_secs(m.elapsed);
    let mut out = Vec::new();
    for (id, l) in &m.links {
        link_rows(&mut out, id.name(), l, elapsed_s);
    }
    latency_rows(&mut out, "e2e", &m.e2e_latency);
    for (&(mode, dir), f) in &m.flows {
        let name = format!("{}_{}", mode.name(), dir.name());
        out.push(row("flow", format!("{name}_packets"), "", f.packets, "count"));
        out.push(row("flow", format!("{name}_bits"), "", f.bits, "bit"));
        out.push(row("flow", format!("{name}_rate"), "", m.flow_bps(mode, dir), "bps"));
    }
    for (&(mode, node), &bits) in &m.sd_uplink_bits {
        let secs = micros_to_secs(m.mode_time.get(&mode).copied().unwrap_or(0));
        let bps = if secs > 0.0 { bits as f64 / secs } else { 0.0 };
        out.push(row("flow", format!("{}_sd_ld_rate", mode.name()), node.to_string(), bps, "bps"));
    }
    for (mode, t) in &m.mode_time {
        out.push(row("run", format!("mode_time_{}", mode.name()), "", micros_to_secs(*t), "s"));
    }
    for (k, v) in &m.counters {
        out.push(row("run", k.as_str(), "", v, "count"));
    }
    out.push(row("run", "recovery_count", "", m.recovery_times.len(), "count"));
    if let Some(max) = m.recovery_times.iter().max() {
        out.push(row("run", "recovery_max", "", max, "us"));
        let mean = m.recovery_times.iter().sum::<u64>() as f64 / m.recovery_times.len() as f64;
        out.push(row("run", "recovery_mean", "", mean, "us"));
    }
    if let Some(c) = &r.capacity {
        out.push(row("run", "call_capacity_wlan", "", c.wlan_bound, "count"));
        out.push(row("run", "call_capacity_wimax_aggregate", "", c.wimax_aggregate_bound, "count"));
        out.push(row("run", "call_capacity_wlan_with_overhead", "", c.wlan_link_overhead_bound, "count"));
    }
    out.push(row("run", "max_calls", "", r.max_calls, "count"));
    out.push(row("run", "targets_planned", "", r.planned_targets.len(), "count"));
    out.push(row("run", "targets_collected", "", r.collected_targets.len(), "count"));
    out.push(row("run", "handovers", "", r.handovers.len(), "count"));
    out.push(row("run", "aborted", "", u8::from(r.aborted), "flag"));
    out.push(row("run", "mission_complete", "", u8::from(r.mission_complete), "flag"));
    out.push(row("run", "events", "", r.events, "count"));
    for (node, l) in &r.energy {
        out.push(row("energy", "rotor", node.to_string(), l.rotor_wh(), "Wh"));
        out.push(row("energy", "compute", node.to_string(), l.compute_wh(), "Wh"));
    }
    out
}

/// Writes the metrics CSV for `results` to any writer.
pub fn write_csv<W: io::Write>(results: &[RunResult], w: W) -> Result<(), EmitError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in results {
        let seed = r.seed.to_string();
        for row in csv_rows(r) {
            wr.write_record([
                r.run_id.as_str(),
                seed.as_str(),
                &row.link,
                &row.metric,
                &row.class,
                &row.value,
                row.unit,
            ])?;
        }
    }
    wr.flush().map_err(|source| EmitError::Io {
        path: "<writer>".to_string(),
        source,
    })?;
    Ok(())
}

pub fn csv_string(results: &[RunResult]) -> String {
    let mut buf = Vec::new();
    write_csv(results, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn write_file(path: &Path, text: &str) -> Result<(), EmitError> {
    std::fs::write(path, text).map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn emit_csv(results: &[RunResult], path: impl AsRef<Path>) -> Result<(), EmitError> {
    if results.is_empty() {
        return Err(EmitError::Empty);
    }
    write_file(path.as_ref(), &csv_string(results))
}

pub fn emit_report(results: &[RunResult], path: impl AsRef<Path>) -> Result<(), EmitError> {
    if results.is_empty() {
        return Err(EmitError::Empty);
    }
    write_file(path.as_ref(), &report_string(results))
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map_or("-".to_string(), |v| v.to_string())
}

/// Plain-text tables: traffic per mode and direction, link and latency
/// summaries, video admission, handovers, task coverage and energy.
pub fn report_string(results: &[RunResult]) -> String {
    let mut s = String::new();
    if results.len() > 1 {
        let _ = writeln!(s, "Sweep summary");
        let _ = writeln!(
            s,
            "{:<40} {:>8} {:>10} {:>10} {:>12} {:>12}",
            "run", "seed", "wlan loss", "wimax loss", "wlan p50 us", "wimax p50 us"
        );
        for r in results {
            let w = r.metrics.link(crate::netsim::LinkId::Wlan);
            let x = r.metrics.link(crate::netsim::LinkId::Wimax);
            let _ = writeln!(
                s,
                "{:<40} {:>8} {:>10.4} {:>10.4} {:>12} {:>12}",
                r.run_id,
                r.seed,
                w.loss_ratio(),
                x.loss_ratio(),
                fmt_opt(w.latency_summary(None).map(|l| l.p50)),
                fmt_opt(x.latency_summary(None).map(|l| l.p50)),
            );
        }
        s.push('\n');
    }
    for r in results {
        run_report(&mut s, r);
    }
    s
}

fn run_report(s: &mut String, r: &RunResult) {
    let m = &r.metrics;
    let status = if r.aborted {
        "ABORTED"
    } else if r.mission_complete {
        "mission complete"
    } else {
        "horizon reached"
    };
    let _ = writeln!(s, "== {} (seed {}) ==", r.run_id, r.seed);
    let _ = writeln!(
        s,
        "status: {status}; simulated {:.1} s; {} events",
        micros_to_secs(m.elapsed),
        r.events
    );

    let _ = writeln!(s, "\nData traffic (bit/s) by mode");
    let _ = write!(s, "{:<12}", "mode");
    for d in FlowDir::ALL {
        let _ = write!(s, " {:>14}", d.name());
    }
    let _ = writeln!(s, " {:>10}", "time s");
    for mode in [TrafficMode::Ground, TrafficMode::Flight, TrafficMode::Collection] {
        let Some(t) = m.mode_time.get(&mode) else { continue };
        let _ = write!(s, "{:<12}", mode.name());
        for d in FlowDir::ALL {
            let _ = write!(s, " {:>14.1}", m.flow_bps(mode, d));
        }
        let _ = writeln!(s, " {:>10.1}", micros_to_secs(*t));
    }

    let _ = writeln!(s, "\nLinks");
    let _ = writeln!(
        s,
        "{:<8} {:<12} {:>10} {:>10} {:>8} {:>8} {:>10} {:>8} {:>8} {:>8}",
        "link", "class", "offered", "delivered", "dropped", "loss %", "mean us", "p50", "p95", "p99"
    );
    let lat_rows = |s: &mut String, link: &str, offered: String, delivered: String, dropped: String, loss: String, by: &BTreeMap<AccessClass, Samples>| {
        let mut groups = vec![("all", LatencySummary::of(by.values()))];
        for c in AccessClass::ALL {
            groups.push((c.name(), LatencySummary::of(by.get(&c))));
        }
        for (i, (class, l)) in groups.into_iter().enumerate() {
            if i > 0 && l.is_none() {
                continue;
            }
            let (o, d, x, lo) = if i == 0 {
                (offered.clone(), delivered.clone(), dropped.clone(), loss.clone())
            } else {
                Default::default()
            };
            let _ = writeln!(
                s,
                "{:<8} {:<12} {:>10} {:>10} {:>8} {:>8} {:>10} {:>8} {:>8} {:>8}",
                link,
                class,
                o,
                d,
                x,
                lo,
                l.map_or("-".into(), |l| format!("{:.1}", l.mean)),
                fmt_opt(l.map(|l| l.p50)),
                fmt_opt(l.map(|l| l.p95)),
                fmt_opt(l.map(|l| l.p99)),
            );
        }
    };
    for (id, l) in &m.links {
        lat_rows(
            s,
            id.name(),
            l.offered_packets.to_string(),
            l.delivered_packets.to_string(),
            l.dropped_packets.to_string(),
            format!("{:.3}", 100.0 * l.loss_ratio()),
            &l.latency,
        );
    }
    lat_rows(s, "e2e", String::new(), String::new(), String::new(), String::new(), &m.e2e_latency);

    if let Some(c) = &r.capacity {
        let _ = writeln!(s, "\nVideo calls");
        let _ = writeln!(
            s,
            "capacity: WLAN {} calls, WiMAX {}; admission limit {}",
            c.wlan_bound,
            c.wimax_bound.map_or("per-flow, not binding".to_string(), |b| b.to_string()),
            r.max_calls
        );
        let _ = writeln!(
            s,
            "diagnostics: WLAN with link overhead {}, WiMAX if shared {}",
            c.wlan_link_overhead_bound, c.wimax_aggregate_bound
        );
        let _ = writeln!(
            s,
            "admitted {}, rejected {}",
            r.calls.len(),
            m.counter("calls_rejected")
        );
    }

    if !r.handovers.is_empty() || !m.recovery_times.is_empty() {
        let _ = writeln!(s, "\nHandovers");
        for h in &r.handovers {
            let _ = writeln!(
                s,
                "{:?} at {:.3} s: {} -> {}{}; lost aggregate {}; new backup {}",
                h.kind,
                micros_to_secs(h.at),
                h.old,
                h.new,
                if h.fallback { " (fallback)" } else { "" },
                h.lost_aggregate,
                h.new_backup.map_or("none".to_string(), |b| b.to_string()),
            );
        }
        for t in &m.recovery_times {
            let _ = writeln!(s, "recovery time {:.3} s", micros_to_secs(*t));
        }
    }

    let _ = writeln!(
        s,
        "\nTargets: planned {}, collected {}",
        r.planned_targets.len(),
        r.collected_targets.len()
    );

    let _ = writeln!(s, "\nEnergy (Wh)");
    let _ = writeln!(s, "{:<6} {:>10} {:>10} {:>10} {:>10}", "drone", "rotor", "compute", "total", "airborne s");
    for (node, l) in &r.energy {
        let air: f64 = l.entries.values().map(|e| e.airborne_s).sum();
        let _ = writeln!(
            s,
            "{:<6} {:>10.3} {:>10.3} {:>10.3} {:>10.0}",
            node.to_string(),
            l.rotor_wh(),
            l.compute_wh(),
            l.total_wh(),
            air
        );
    }
    if !m.counters.is_empty() {
        let _ = writeln!(s, "\nCounters");
        for (k, v) in &m.counters {
            let _ = writeln!(s, "{k:<28} {v}");
        }
    }
    if !r.deviations.is_empty() {
        let _ = writeln!(s, "\nDeviations");
        for d in &r.deviations {
            let _ = writeln!(s, "- {d}");
        }
    }
    s.push('\n');
}

/// The durability table as CSV: battery, max_sessions, max_hours.
pub fn durability_csv(report: &DurabilityReport) -> String {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["battery", "max_sessions", "max_hours"]).expect("memory");
    for r in &report.rows {
        wr.write_record([r.battery.clone(), r.max_sessions.to_string(), r.max_hours.to_string()])
            .expect("memory");
    }
    String::from_utf8(wr.into_inner().expect("memory")).expect("utf-8")
}
