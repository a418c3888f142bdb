#![allow(dead_code)]

use gbdeer::model::{Flow, MobilityParams, NodeId, Placement, Protocol, ScenarioConfig};

pub const R: f64 = 250.0;

pub fn cell_side() -> f64 {
    R / 5f64.sqrt()
}

pub fn flow(src: u32, dst: u32, interval: f64, start: f64, stop: f64) -> Flow {
    Flow { src: NodeId(src), dst: NodeId(dst), packet_size_bits: 1024, interval, start, stop }
}

pub fn fixed(id: u32, x: f64, y: f64) -> Placement {
    Placement { id: NodeId(id), x, y, target: None, speed: 0.0, start: 0.0 }
}

/// Every node pinned at the given position.
pub fn static_cfg(protocol: Protocol, w: f64, h: f64, positions: &[(f64, f64)], traffic: Vec<Flow>, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        area_w: w,
        area_h: h,
        n_nodes: positions.len() as u32,
        mobility: MobilityParams { v_min: 0.0, v_max: 0.0, pause: 0.0 },
        placement: positions.iter().enumerate().map(|(i, &(x, y))| fixed(i as u32, x, y)).collect(),
        traffic,
        duration,
        protocol,
        ..ScenarioConfig::default()
    }
}

/// Uniform random positions drawn by the engine, nobody moves.
pub fn random_static_cfg(protocol: Protocol, seed: u64, n: u32, w: f64, h: f64, traffic: Vec<Flow>, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        area_w: w,
        area_h: h,
        n_nodes: n,
        mobility: MobilityParams { v_min: 0.0, v_max: 0.0, pause: 0.0 },
        traffic,
        duration,
        seed,
        protocol,
        ..ScenarioConfig::default()
    }
}

/// Three cells in a row. Node 0 supervises cell 0 and node 3 cell 2. In cell 1
/// node 1 supervises with node 2 as subordinate; node 1 starts moving at t=40
/// and crosses into cell 2 just after t=50. Flow 0 runs from node 0 to node 3.
pub fn handover_cfg() -> ScenarioConfig {
    let r = cell_side();
    let y = r / 2.0;
    let x1 = 2.0 * r - 10.0 - 1e-7;
    let mut cfg = static_cfg(
        Protocol::Gbdeer,
        3.0 * r,
        r,
        &[(0.5 * r, y), (x1, y), (1.5 * r, y), (2.5 * r, y)],
        vec![flow(0, 3, 1.0, 1.0, 100.0)],
        100.0,
    );
    cfg.maintenance_interval = 1.0;
    cfg.placement[1].target = Some(gbdeer::model::Vec2::new(240.0, y));
    cfg.placement[1].speed = 1.0;
    cfg.placement[1].start = 40.0;
    cfg
}

/// The 100-node default scenario with a handful of flows.
pub fn busy_cfg(protocol: Protocol, seed: u64) -> ScenarioConfig {
    let traffic = (0..5).map(|k| flow(k, 99 - k, 2.0, 1.0 + k as f64, 300.0)).collect();
    ScenarioConfig { traffic, seed, protocol, ..ScenarioConfig::default() }
}

pub fn trace_bytes(out: &gbdeer::RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf).unwrap();
    buf
}
