mod common;

use common::*;
use gbdeer::engine::{run_with, RunOptions, TraceEvent};
use gbdeer::model::{Level, NodeId, Protocol, ScenarioConfig};
use gbdeer::{run, Error};

#[test]
fn two_static_nodes_deliver_everything() {
    let cfg = static_cfg(Protocol::Gbdeer, 300.0, 120.0, &[(50.0, 50.0), (150.0, 50.0)], vec![flow(0, 1, 1.0, 0.5, 20.0)], 20.0);
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.delivery_ratio, 1.0);
    assert_eq!(out.metrics.partition_count, 0);
    assert_eq!(out.metrics.delivered, 20);
    let route = out.routes[0].as_ref().unwrap();
    assert_eq!(route.hops, vec![NodeId(0), NodeId(1)]);
    assert_eq!(route.hop_levels, vec![Some(Level::Tmid)]);
}

#[test]
fn same_config_same_bytes() {
    let cfg = busy_cfg(Protocol::Gbdeer, 7);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(trace_bytes(&a), trace_bytes(&b));
    assert_eq!(a.metrics.to_document(), b.metrics.to_document());
}

#[test]
fn different_seeds_differ() {
    let a = run(&busy_cfg(Protocol::Gbdeer, 1)).unwrap();
    let b = run(&busy_cfg(Protocol::Gbdeer, 2)).unwrap();
    assert_ne!(trace_bytes(&a), trace_bytes(&b));
}

#[test]
fn fixed_power_spends_at_least_as_much() {
    let mut cfg = random_static_cfg(Protocol::Gbdeer, 3, 60, 600.0, 600.0, vec![flow(0, 1, 1.0, 1.0, 60.0), flow(2, 3, 1.0, 1.0, 60.0)], 60.0);
    cfg.control_packet_bits = 0;
    let g = run(&cfg).unwrap();
    cfg.protocol = Protocol::GafFixed;
    let f = run(&cfg).unwrap();
    assert!(g.metrics.energy_total <= f.metrics.energy_total);
}

#[test]
fn minhop_line_takes_four_hops() {
    let pos: Vec<(f64, f64)> = (0..5).map(|i| (10.0 + 200.0 * i as f64, 50.0)).collect();
    let cfg = static_cfg(Protocol::Minhop, 1000.0, 100.0, &pos, vec![flow(0, 4, 1.0, 1.0, 10.0)], 10.0);
    let out = run(&cfg).unwrap();
    assert_eq!(out.routes[0].as_ref().unwrap().hop_count(), 4);
    assert_eq!(out.metrics.delivery_ratio, 1.0);
}

#[test]
fn disconnected_pair_never_delivers() {
    for protocol in Protocol::ALL {
        let cfg = static_cfg(protocol, 1000.0, 100.0, &[(10.0, 50.0), (900.0, 50.0)], vec![flow(0, 1, 1.0, 1.0, 10.0)], 10.0);
        let out = run(&cfg).unwrap();
        assert_eq!(out.metrics.delivery_ratio, 0.0, "{protocol:?}");
        assert!(out.metrics.partition_count >= 1, "{protocol:?}");
        assert!(out.metrics.network_lifetime_t.is_some());
    }
}

#[test]
fn mobile_run_keeps_invariants() {
    for protocol in Protocol::ALL {
        let cfg = ScenarioConfig { duration: 120.0, ..busy_cfg(protocol, 11) };
        let out = run_with(&cfg, RunOptions { check_invariants: true }).unwrap();
        assert!(out.violations.is_empty(), "{protocol:?}: {:?}", &out.violations[..out.violations.len().min(5)]);
        assert!(out.metrics.delivered > 0, "{protocol:?}");
    }
}

#[test]
fn handover_keeps_flow_alive() {
    let out = run_with(&handover_cfg(), RunOptions { check_invariants: true }).unwrap();
    assert!(out.violations.is_empty(), "{:?}", out.violations);
    let handovers: Vec<_> = out.trace.rows().iter().filter(|r| matches!(r.event, TraceEvent::Handover { .. })).collect();
    assert_eq!(handovers.len(), 1);
    assert!(handovers[0].t > 50.0 && handovers[0].t <= 51.0, "{}", handovers[0].t);
    assert_eq!(out.metrics.rediscovery_count, 0);
    assert_eq!(out.metrics.dropped, 0);
    assert_eq!(out.routes[0].as_ref().unwrap().hops, vec![NodeId(0), NodeId(2), NodeId(3)]);
}

#[test]
fn energy_exhaustion_kills_nodes() {
    let mut cfg = busy_cfg(Protocol::GafFixed, 5);
    cfg.e_init = 0.05;
    cfg.handover_threshold = 0.02;
    cfg.duration = 200.0;
    let out = run_with(&cfg, RunOptions { check_invariants: true }).unwrap();
    assert!(out.violations.is_empty(), "{:?}", &out.violations[..out.violations.len().min(5)]);
    assert!(out.metrics.first_death_t.is_some());
    assert!(out.nodes.iter().any(|n| !n.alive));
    assert!(out.nodes.iter().all(|n| n.e_res >= 0.0));
}

#[test]
fn zero_duration_is_empty() {
    let cfg = ScenarioConfig { duration: 0.0, ..busy_cfg(Protocol::Gbdeer, 1) };
    let out = run(&cfg).unwrap();
    assert!(out.trace.is_empty());
    assert_eq!(out.metrics.energy_total, 0.0);
    assert_eq!(out.metrics.energy_per_node.len(), 100);
}

#[test]
fn invalid_config_is_refused() {
    let cfg = ScenarioConfig { handover_threshold: 9.0, ..ScenarioConfig::default() };
    match run(&cfg) {
        Err(Error::InvalidConfig(msg)) => assert_eq!(msg, "handover_threshold < e_init"),
        other => panic!("{other:?}"),
    }
}
