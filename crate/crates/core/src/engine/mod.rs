//! Discrete-event core.
//!
//! One [`Simulator`] owns every piece of mutable state for a run and
//! processes events strictly in order on a single thread. Node positions are
//! brought up to the current instant before each event is handled.
//!
//! Grid protocols (`gbdeer`, `gaf-fixed`) bootstrap by electing a supervisor
//! and subordinate per cell, building the supervisor MST, and routing each
//! flow along it. `gbdeer` probes every hop with the three-level handshake
//! and re-tunes link ranges at each maintenance tick; `gaf-fixed` sends
//! everything at the maximum level. `minhop` ignores the grid and routes over
//! the unit-disk graph of all nodes.
//!
//! Packets are forwarded hop by hop within the event that created them. Each
//! hop adds a fixed latency to the packet's end-to-end delay.

pub mod maintenance;
pub mod queue;
pub mod trace;

use std::collections::BTreeMap;

use log::debug;

use crate::election::{elect_weighted, promote_weighted, CellRoster, ElectionWeights};
use crate::energy::{self, rx_cost, tx_cost, Cause, EnergyLedger};
use crate::error::Result;
use crate::grid::{CellIndex, GridLayout};
use crate::metrics::{aggregate, unit_disk_path, Metrics};
use crate::mobility::{depart_time, node_stream, Area, WaypointState};
use crate::model::{
    validate_config, ControlKind, GafState, Level, NodeId, NodeState, PowerLevel, Protocol, Role, ScenarioConfig, Vec2,
};
use crate::power::{handshake, LinkPower, PowerTable, Unreachable};
use crate::routing::{build_mst, route_path, segment_tree, RoutePath, SupervisorTree};

pub use maintenance::{gaf_states_tick, maintenance_check, MaintenanceAction};
pub use queue::{Event, EventKind, EventQueue};
pub use trace::{Trace, TraceEvent, TraceRow};

/// Depart alarms fire this long after the predicted crossing so the node is
/// unambiguously in its new cell.
pub const DEPART_GUARD: f64 = 1e-6;

/// Maximum depth of one segment of the supervisor tree.
pub const SEGMENT_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct DataPacket {
    pub flow: usize,
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bits: u64,
    pub created_t: f64,
    pub hops_taken: Vec<NodeId>,
    pub retx_count: u32,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Check per-event invariants and report violations in the output.
    pub check_invariants: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub trace: Trace,
    pub ledger: EnergyLedger,
    /// Final node states.
    pub nodes: Vec<NodeState>,
    /// Route in force for each flow at the end of the run.
    pub routes: Vec<Option<RoutePath>>,
    pub tree: Option<SupervisorTree>,
    pub rosters: BTreeMap<CellIndex, CellRoster>,
    /// Empty unless [`RunOptions::check_invariants`] was set and something broke.
    pub violations: Vec<String>,
}

/// Runs `cfg` to completion with default options.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput> {
    if cfg.duration == 0.0 {
        // Everything else must still be valid.
        validate_config(ScenarioConfig { duration: 1.0, ..cfg.clone() })?;
        let n = cfg.n_nodes as usize;
        return Ok(RunOutput {
            metrics: Metrics { energy_per_node: vec![0.0; n], ..Metrics::default() },
            trace: Trace::new(),
            ledger: EnergyLedger::new(n),
            nodes: Vec::new(),
            routes: vec![None; cfg.traffic.len()],
            tree: None,
            rosters: BTreeMap::new(),
            violations: Vec::new(),
        });
    }
    let cfg = validate_config(cfg.clone())?;
    Ok(Simulator::new(cfg, opts)?.run())
}

#[derive(Clone, Debug)]
struct ActiveRoute {
    path: RoutePath,
    links: Vec<LinkPower>,
}

#[derive(Clone, Debug)]
struct FlowState {
    src: NodeId,
    dst: NodeId,
    bits: u64,
    interval: f64,
    stop: f64,
    route: Option<ActiveRoute>,
    /// A Partition row has been emitted and no route found since.
    unroutable: bool,
    last_attempt: f64,
}

struct Simulator {
    cfg: ScenarioConfig,
    opts: RunOptions,
    protocol: Protocol,
    table: PowerTable,
    layout: GridLayout,
    weights: ElectionWeights,
    nodes: Vec<NodeState>,
    movers: Vec<WaypointState>,
    ledger: EnergyLedger,
    queue: EventQueue,
    trace: Trace,
    rosters: BTreeMap<CellIndex, CellRoster>,
    tree: Option<SupervisorTree>,
    flows: Vec<FlowState>,
    now: f64,
    last_drain: f64,
    next_packet: u64,
    armed_leg: Vec<Option<u64>>,
    alarm_gen: Vec<u64>,
    rediscovery_pending: bool,
    prev_energy: Vec<f64>,
    violations: Vec<String>,
}

impl Simulator {
    fn new(cfg: ScenarioConfig, opts: RunOptions) -> Result<Self> {
        let table = PowerTable::from_levels(&cfg.power_table)?;
        let layout = GridLayout::new(cfg.radio_range_r, cfg.area_w, cfg.area_h)?;
        let area = Area { w: cfg.area_w, h: cfg.area_h };
        let n = cfg.n_nodes as usize;
        let placements: BTreeMap<NodeId, _> = cfg.placement.iter().map(|p| (p.id, p)).collect();

        let mut nodes = Vec::with_capacity(n);
        let mut movers = Vec::with_capacity(n);
        for i in 0..n {
            let id = NodeId(i as u32);
            let (node, wp) = match placements.get(&id) {
                Some(p) => {
                    let mut node = NodeState::new(id, Vec2::new(p.x, p.y), cfg.e_init);
                    let wp = WaypointState::scripted(&mut node, p, area);
                    (node, wp)
                }
                None => {
                    let mut rng = node_stream(cfg.seed, id);
                    let mut node = NodeState::new(id, area.sample(&mut rng), cfg.e_init);
                    let wp = WaypointState::random(&mut node, cfg.mobility, area, rng);
                    (node, wp)
                }
            };
            nodes.push(node);
            movers.push(wp);
        }

        let flows = cfg
            .traffic
            .iter()
            .map(|f| FlowState {
                src: f.src,
                dst: f.dst,
                bits: f.packet_size_bits,
                interval: f.interval,
                stop: f.stop,
                route: None,
                unroutable: false,
                last_attempt: f64::NEG_INFINITY,
            })
            .collect();

        Ok(Simulator {
            protocol: cfg.protocol,
            weights: ElectionWeights { energy: cfg.weight_energy, mobility: cfg.weight_mobility },
            table,
            layout,
            ledger: EnergyLedger::new(n),
            queue: EventQueue::new(),
            trace: Trace::new(),
            rosters: BTreeMap::new(),
            tree: None,
            flows,
            now: 0.0,
            last_drain: 0.0,
            next_packet: 0,
            armed_leg: vec![None; n],
            alarm_gen: vec![0; n],
            rediscovery_pending: false,
            prev_energy: nodes.iter().map(|n| n.e_res).collect(),
            violations: Vec::new(),
            nodes,
            movers,
            cfg,
            opts,
        })
    }

    fn run(mut self) -> RunOutput {
        self.bootstrap();
        let duration = self.cfg.duration;
        while let Some(ev) = self.queue.pop() {
            if ev.t >= duration {
                break;
            }
            self.now = ev.t;
            self.sync_motion();
            self.handle(ev.kind);
            if self.opts.check_invariants {
                self.check_invariants();
            }
        }
        self.now = duration;
        self.sync_motion();
        self.drain();
        if self.opts.check_invariants {
            self.check_invariants();
            self.check_ledger();
        }
        self.finish()
    }

    fn finish(self) -> RunOutput {
        let metrics = aggregate(self.trace.rows(), &self.ledger);
        RunOutput {
            metrics,
            routes: self.flows.into_iter().map(|f| f.route.map(|r| r.path)).collect(),
            trace: self.trace,
            ledger: self.ledger,
            nodes: self.nodes,
            tree: self.tree,
            rosters: self.rosters,
            violations: self.violations,
        }
    }

    fn grid(&self) -> bool {
        self.protocol.uses_grid()
    }

    fn bootstrap(&mut self) {
        if self.grid() {
            for cell in self.layout.cells().collect::<Vec<_>>() {
                self.rosters.insert(cell, CellRoster::empty(cell));
            }
            self.discover(None, false);
        } else {
            for n in self.nodes.iter_mut().filter(|n| n.alive) {
                n.set_role(Role::Supervisor);
            }
            for f in 0..self.flows.len() {
                self.establish_route(f, false, true);
            }
        }

        let duration = self.cfg.duration;
        if self.cfg.maintenance_interval < duration {
            self.queue.push(self.cfg.maintenance_interval, EventKind::Maintenance);
        }
        if self.cfg.mobility_tick < duration {
            self.queue.push(self.cfg.mobility_tick, EventKind::MobilityTick);
        }
        for (i, f) in self.cfg.traffic.iter().enumerate() {
            if f.start < f.stop && f.start < duration {
                self.queue.push(f.start, EventKind::PacketSend { flow: i });
            }
        }
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::NodeDeath(id) => self.on_death(id),
            EventKind::Maintenance => self.on_maintenance(),
            EventKind::DepartAlarm { node, generation } => self.on_depart_alarm(node, generation),
            EventKind::PacketSend { flow } => self.on_packet_send(flow),
            EventKind::MobilityTick => {
                self.trace.push(self.now, TraceEvent::MobilityTick);
                let next = self.now + self.cfg.mobility_tick;
                if next < self.cfg.duration {
                    self.queue.push(next, EventKind::MobilityTick);
                }
            }
            EventKind::Rediscovery => {
                if self.rediscovery_pending {
                    self.rediscover(None);
                }
            }
            EventKind::PacketHop => {}
        }
    }

    // ---- motion and GAF state ----

    fn sync_motion(&mut self) {
        let t = self.now;
        for (node, mover) in self.nodes.iter_mut().zip(self.movers.iter_mut()) {
            mover.advance_to(node, t);
        }
        if self.grid() {
            let stale: Vec<(NodeId, CellIndex)> = self
                .supervisors()
                .into_iter()
                .filter(|(s, _)| self.armed_leg[s.index()] != Some(self.movers[s.index()].leg))
                .collect();
            for (s, c) in stale {
                self.arm_alarm(s, c);
            }
        }
    }

    fn supervisors(&self) -> Vec<(NodeId, CellIndex)> {
        self.rosters.values().filter_map(|r| r.supervisor.map(|s| (s, r.cell))).collect()
    }

    fn supervised_cell(&self, id: NodeId) -> Option<CellIndex> {
        self.rosters.values().find(|r| r.supervisor == Some(id)).map(|r| r.cell)
    }

    fn arm_alarm(&mut self, s: NodeId, cell: CellIndex) {
        let i = s.index();
        self.armed_leg[i] = Some(self.movers[i].leg);
        self.alarm_gen[i] += 1;
        let generation = self.alarm_gen[i];
        let node = &self.nodes[i];
        let at = if self.layout.cell_of_clamped(node.pos) != cell {
            Some(self.now)
        } else {
            // Wake up at the end of the leg too: the new leg may head out.
            let depart = depart_time(node, cell, &self.layout).map(|dt| self.now + dt + DEPART_GUARD);
            match (depart, self.movers[i].next_change()) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        };
        if let Some(at) = at {
            if at < self.cfg.duration {
                self.queue.push(at, EventKind::DepartAlarm { node: s, generation });
            }
        }
    }

    /// Syncs roles and radio states with the rosters and keeps one depart
    /// alarm armed per moving supervisor.
    fn apply_roles(&mut self) {
        let sups = self.supervisors();
        gaf_states_tick(&self.rosters, &mut self.nodes);
        let mut is_sup = vec![false; self.nodes.len()];
        for &(s, c) in &sups {
            is_sup[s.index()] = true;
            if self.armed_leg[s.index()] != Some(self.movers[s.index()].leg) {
                self.arm_alarm(s, c);
            }
        }
        for (i, sup) in is_sup.into_iter().enumerate() {
            if !sup && self.armed_leg[i].is_some() {
                self.armed_leg[i] = None;
                self.alarm_gen[i] += 1;
            }
        }
    }

    /// Alive nodes per physical cell, leaving out nodes that still supervise
    /// some other cell.
    fn occupancy(&self) -> BTreeMap<CellIndex, Vec<NodeId>> {
        let mut sup_of: Vec<Option<CellIndex>> = vec![None; self.nodes.len()];
        for (s, c) in self.supervisors() {
            sup_of[s.index()] = Some(c);
        }
        let mut occ: BTreeMap<CellIndex, Vec<NodeId>> = BTreeMap::new();
        for n in self.nodes.iter().filter(|n| n.alive) {
            let c = self.layout.cell_of_clamped(n.pos);
            if sup_of[n.id.index()].is_some_and(|sc| sc != c) {
                continue;
            }
            occ.entry(c).or_default().push(n.id);
        }
        occ
    }

    fn occupants(&self, cell: CellIndex) -> Vec<NodeId> {
        self.occupancy().remove(&cell).unwrap_or_default()
    }

    fn states(&self, ids: &[NodeId]) -> Vec<&NodeState> {
        ids.iter().map(|id| &self.nodes[id.index()]).collect()
    }

    fn supervisor_valid(&self, s: NodeId, cell: CellIndex) -> bool {
        let n = &self.nodes[s.index()];
        n.alive && self.layout.cell_of_clamped(n.pos) == cell
    }

    /// Drops invalid supervisors, elects into every hole that has occupants,
    /// and refreshes member lists and missing subordinates.
    fn refresh_rosters(&mut self) {
        let mut dropped: BTreeMap<CellIndex, NodeId> = BTreeMap::new();
        let invalid: Vec<(CellIndex, NodeId)> = self
            .supervisors()
            .into_iter()
            .filter(|&(s, c)| !self.supervisor_valid(s, c))
            .map(|(s, c)| (c, s))
            .collect();
        for (c, s) in invalid {
            self.rosters.insert(c, CellRoster::empty(c));
            dropped.insert(c, s);
        }

        let occ = self.occupancy();
        let v_max = self.cfg.mobility.v_max;
        let cells: Vec<CellIndex> = self.rosters.keys().copied().collect();
        for c in cells {
            let ids = occ.get(&c).cloned().unwrap_or_default();
            let roster = &self.rosters[&c];
            match roster.supervisor {
                None => {
                    if ids.is_empty() && !dropped.contains_key(&c) {
                        if !roster.members.is_empty() {
                            self.rosters.insert(c, CellRoster::empty(c));
                        }
                        continue;
                    }
                    let fresh = elect_weighted(c, self.states(&ids), v_max, &self.weights);
                    self.trace.push(
                        self.now,
                        TraceEvent::Reelect { cell: c, old: dropped.get(&c).copied(), new: fresh.supervisor },
                    );
                    self.rosters.insert(c, fresh);
                }
                Some(sup) => {
                    let mut members = ids.clone();
                    if !members.contains(&sup) {
                        members.push(sup);
                    }
                    members.sort();
                    let sub_ok = roster.subordinate.is_some_and(|sub| sub != sup && ids.contains(&sub));
                    let subordinate = if sub_ok {
                        roster.subordinate
                    } else {
                        let others: Vec<NodeId> = ids.iter().copied().filter(|&x| x != sup).collect();
                        elect_weighted(c, self.states(&others), v_max, &self.weights).supervisor
                    };
                    self.rosters.insert(c, CellRoster { cell: c, supervisor: Some(sup), subordinate, members });
                }
            }
        }
    }

    // ---- energy ----

    fn charge(&mut self, id: NodeId, cause: Cause, joules: f64) {
        if joules <= 0.0 || !self.nodes[id.index()].alive {
            return;
        }
        let c = energy::charge(&mut self.nodes[id.index()], &mut self.ledger, cause, joules, self.now);
        if c.died {
            debug!("node {id} died at t={}", self.now);
            self.queue.push(self.now, EventKind::NodeDeath(id));
        }
    }

    fn drain(&mut self) {
        let dt = self.now - self.last_drain;
        if dt <= 0.0 {
            return;
        }
        let p = self.cfg.energy_params;
        let grid = self.grid();
        for i in 0..self.nodes.len() {
            let n = &self.nodes[i];
            if !n.alive {
                continue;
            }
            let awake = !grid || n.gaf_state == GafState::Active;
            let (cause, watts) = if awake { (Cause::Idle, p.p_idle) } else { (Cause::Sleep, p.p_sleep) };
            self.charge(n.id, cause, watts * dt);
        }
        self.last_drain = self.now;
    }

    /// Control packet heard by every alive node within the level's range.
    fn broadcast_control(&mut self, kind: ControlKind, sender: NodeId, receiver: Option<NodeId>, level: PowerLevel) {
        let bits = self.cfg.control_packet_bits;
        let p = self.cfg.energy_params;
        self.charge(sender, Cause::Tx, tx_cost(level, bits, &p));
        let origin = self.nodes[sender.index()].pos;
        let listeners: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.alive && n.id != sender && n.pos.dist(origin) <= level.range)
            .map(|n| n.id)
            .collect();
        for &l in &listeners {
            self.charge(l, Cause::Rx, rx_cost(bits, &p));
        }
        self.trace.push(
            self.now,
            TraceEvent::ControlTx { kind, sender, receiver, level: level.level, bits, listeners: listeners.len() },
        );
    }

    fn unicast_control(&mut self, kind: ControlKind, sender: NodeId, receiver: NodeId, level: PowerLevel) {
        let bits = self.cfg.control_packet_bits;
        let p = self.cfg.energy_params;
        self.charge(sender, Cause::Tx, tx_cost(level, bits, &p));
        self.charge(receiver, Cause::Rx, rx_cost(bits, &p));
        self.trace.push(
            self.now,
            TraceEvent::ControlTx { kind, sender, receiver: Some(receiver), level: level.level, bits, listeners: 1 },
        );
    }

    /// Listen_ctrl escalation from `u` toward `v`, charging every probe and
    /// the acknowledgment.
    fn probe_link(&mut self, u: NodeId, v: NodeId) -> std::result::Result<LinkPower, Unreachable> {
        let outcome = if self.nodes[v.index()].alive {
            handshake(&self.nodes[u.index()], &self.nodes[v.index()], &self.table)
        } else {
            Err(Unreachable { attempts: Level::ALL.len() })
        };
        let tried = match &outcome {
            Ok(hs) => hs.attempts,
            Err(e) => e.attempts,
        };
        for k in 0..tried {
            let level = self.table.levels()[k];
            self.broadcast_control(ControlKind::ListenCtrl, u, Some(v), level);
        }
        match outcome {
            Ok(hs) => {
                self.unicast_control(ControlKind::AckListenCtrl, v, u, hs.level);
                self.trace.push(
                    self.now,
                    TraceEvent::Handshake { from: u, to: v, level: Some(hs.level.level), attempts: hs.attempts },
                );
                Ok(LinkPower::from_handshake(u, v, hs, self.now))
            }
            Err(e) => {
                self.trace.push(self.now, TraceEvent::Handshake { from: u, to: v, level: None, attempts: e.attempts });
                Err(e)
            }
        }
    }

    // ---- routing ----

    fn flow_live(&self, f: usize) -> bool {
        self.now < self.flows[f].stop
    }

    fn mark_unroutable(&mut self, f: usize, reason: &str, report: bool) {
        self.flows[f].route = None;
        if report && !self.flows[f].unroutable {
            self.flows[f].unroutable = true;
            self.trace.push(self.now, TraceEvent::Partition { flow: f, reason: reason.to_string() });
        }
    }

    /// Computes and powers a route for flow `f`. With `reuse`, links already
    /// in force for the same hop pair keep their power setting.
    fn establish_route(&mut self, f: usize, reuse: bool, report: bool) -> bool {
        let (src, dst) = (self.flows[f].src, self.flows[f].dst);
        let alive = |id: NodeId| self.nodes[id.index()].alive;
        let found: std::result::Result<RoutePath, String> = if !alive(src) || !alive(dst) {
            Err("endpoint dead".into())
        } else if self.grid() {
            match &self.tree {
                None => Err("no supervisors".into()),
                Some(tree) => {
                    let sc = self.layout.cell_of_clamped(self.nodes[src.index()].pos);
                    let dc = self.layout.cell_of_clamped(self.nodes[dst.index()].pos);
                    route_path(tree, (src, sc), (dst, dc), &self.rosters).map_err(|e| e.to_string())
                }
            }
        } else {
            unit_disk_path(&self.nodes, self.table.max_range(), src, dst)
                .map(RoutePath::new)
                .ok_or_else(|| "no unit-disk path".to_string())
        };
        let mut path = match found {
            Ok(p) => p,
            Err(reason) => {
                self.mark_unroutable(f, &reason, report);
                return false;
            }
        };

        let old_links = if reuse { self.flows[f].route.take().map(|r| r.links) } else { None };
        let mut links = Vec::with_capacity(path.hop_count());
        for (u, v) in path.links().collect::<Vec<_>>() {
            let kept = old_links
                .as_ref()
                .and_then(|ls| ls.iter().find(|l| l.from == u && l.to == v).copied());
            let link = match (kept, self.protocol) {
                (Some(l), _) => l,
                (None, Protocol::Gbdeer) => match self.probe_link(u, v) {
                    Ok(l) => l,
                    Err(_) => {
                        self.mark_unroutable(f, "hop unreachable at Tmax", report);
                        return false;
                    }
                },
                (None, _) => {
                    let d = self.nodes[u.index()].pos.dist(self.nodes[v.index()].pos);
                    if d > self.table.max_range() {
                        self.mark_unroutable(f, "hop beyond Tmax", report);
                        return false;
                    }
                    LinkPower::fixed(u, v, &self.table, self.now)
                }
            };
            links.push(link);
        }
        path.hop_levels = links.iter().map(|l| Some(l.level.level)).collect();

        let segments = match (&self.tree, self.grid()) {
            (Some(tree), true) => {
                let sc = self.layout.cell_of_clamped(self.nodes[src.index()].pos);
                let root = self.rosters.get(&sc).and_then(|r| r.supervisor).unwrap_or(src);
                segment_tree(tree, root, SEGMENT_DEPTH).len()
            }
            _ => 0,
        };
        self.trace.push(self.now, TraceEvent::Routed { flow: f, hops: path.hops.clone(), segments });
        self.flows[f].route = Some(ActiveRoute { path, links });
        self.flows[f].unroutable = false;
        true
    }

    /// Route discovery: repairs broken cells, rebuilds the supervisor tree
    /// from scratch, and re-routes every live flow.
    fn discover(&mut self, trigger: Option<usize>, counted: bool) {
        if counted {
            self.trace.push(self.now, TraceEvent::Rediscovery { flow: trigger });
        }
        self.refresh_rosters();
        self.apply_roles();
        let sups: Vec<(NodeId, Vec2)> =
            self.supervisors().into_iter().map(|(s, _)| (s, self.nodes[s.index()].pos)).collect();
        self.tree = build_mst(&sups).ok();
        for f in 0..self.flows.len() {
            if self.flow_live(f) {
                self.establish_route(f, false, true);
            } else {
                self.flows[f].route = None;
            }
        }
        self.rediscovery_pending = false;
    }

    fn rediscover(&mut self, trigger: Option<usize>) {
        match (self.grid(), trigger) {
            (true, _) => self.discover(trigger, true),
            (false, Some(f)) => {
                self.trace.push(self.now, TraceEvent::Rediscovery { flow: Some(f) });
                self.establish_route(f, false, true);
            }
            (false, None) => {}
        }
    }

    fn request_rediscovery(&mut self) {
        if !self.rediscovery_pending {
            self.rediscovery_pending = true;
            self.queue.push(self.now, EventKind::Rediscovery);
        }
    }

    /// Puts `new` in `old`'s place in the tree and re-routes affected flows.
    fn splice(&mut self, old: NodeId, new: NodeId) {
        let pos = self.nodes[new.index()].pos;
        let renamed = match &mut self.tree {
            Some(tree) if tree.contains(old) => tree.rename(old, new, pos),
            _ => false,
        };
        if !renamed && self.tree.as_ref().is_some_and(|t| t.contains(old)) {
            self.request_rediscovery();
            return;
        }
        for f in 0..self.flows.len() {
            let uses = self.flows[f].route.as_ref().is_some_and(|r| r.path.hops.contains(&old));
            if uses && self.flow_live(f) && !self.establish_route(f, true, false) {
                self.request_rediscovery();
            }
        }
    }

    // ---- maintenance ----

    fn apply_action(&mut self, cell: CellIndex, action: MaintenanceAction) {
        let roster = self.rosters[&cell].clone();
        let Some(old) = roster.supervisor else { return };
        match action {
            MaintenanceAction::None => {}
            MaintenanceAction::Handover => {
                if self.nodes[old.index()].alive {
                    let level = self.table.get(Level::Tmax);
                    self.broadcast_control(ControlKind::SupervisorError, old, None, level);
                }
                let ids = self.occupants(cell);
                let promoted = promote_weighted(&roster, self.states(&ids), self.cfg.mobility.v_max, &self.weights);
                match promoted {
                    Ok(next) => {
                        let new = next.supervisor.expect("promotion yields a supervisor");
                        self.rosters.insert(cell, next);
                        self.trace.push(self.now, TraceEvent::Handover { cell, old, new });
                        self.apply_roles();
                        self.splice(old, new);
                    }
                    Err(_) => self.reelect_cell(cell),
                }
            }
            MaintenanceAction::Reelect => self.reelect_cell(cell),
        }
    }

    fn reelect_cell(&mut self, cell: CellIndex) {
        let old = self.rosters[&cell].supervisor;
        let ids = self.occupants(cell);
        let fresh = elect_weighted(cell, self.states(&ids), self.cfg.mobility.v_max, &self.weights);
        let new = fresh.supervisor;
        self.rosters.insert(cell, fresh);
        self.trace.push(self.now, TraceEvent::Reelect { cell, old, new });
        self.apply_roles();
        match (old, new) {
            (Some(o), Some(n)) if o != n => self.splice(o, n),
            (Some(o), None) => {
                let in_tree = self.tree.as_ref().is_some_and(|t| t.contains(o));
                let in_use = self.flows.iter().any(|f| f.route.as_ref().is_some_and(|r| r.path.hops.contains(&o)));
                if in_tree || in_use {
                    self.request_rediscovery();
                }
            }
            _ => {}
        }
    }

    fn readjust_links(&mut self) {
        let now = self.now;
        for f in 0..self.flows.len() {
            let Some(route) = self.flows[f].route.as_mut() else { continue };
            let mut saturated = Vec::new();
            for (k, link) in route.links.iter_mut().enumerate() {
                let a = &self.nodes[link.from.index()];
                let b = &self.nodes[link.to.index()];
                let adj = link.readjust(a, b, now, &self.table);
                route.path.hop_levels[k] = Some(link.level.level);
                if adj.saturated {
                    saturated.push((link.from, link.to));
                }
            }
            for (from, to) in saturated {
                self.trace.push(now, TraceEvent::RangeSaturated { from, to });
            }
        }
    }

    fn on_maintenance(&mut self) {
        self.drain();
        self.trace.push(self.now, TraceEvent::Maintenance);
        if self.grid() {
            let cells: Vec<CellIndex> = self.supervisors().into_iter().map(|(_, c)| c).collect();
            for c in cells {
                if self.rosters[&c].supervisor.is_none() {
                    continue;
                }
                let action = maintenance_check(&self.rosters[&c], &self.nodes, &self.layout, self.cfg.handover_threshold);
                self.apply_action(c, action);
            }
            self.refresh_rosters();
            self.apply_roles();
            if self.protocol == Protocol::Gbdeer {
                self.readjust_links();
            }
        }
        if self.opts.check_invariants {
            self.check_ledger();
        }
        let next = self.now + self.cfg.maintenance_interval;
        if next < self.cfg.duration {
            self.queue.push(next, EventKind::Maintenance);
        }
    }

    fn on_depart_alarm(&mut self, node: NodeId, generation: u64) {
        let Some(cell) = self.supervised_cell(node) else { return };
        // A superseded alarm still counts if the node is already gone.
        if self.alarm_gen[node.index()] != generation && self.supervisor_valid(node, cell) {
            return;
        }
        self.armed_leg[node.index()] = None;
        let action = maintenance_check(&self.rosters[&cell], &self.nodes, &self.layout, self.cfg.handover_threshold);
        let left = !self.supervisor_valid(node, cell);
        if left || action != MaintenanceAction::None {
            self.trace.push(self.now, TraceEvent::DepartAlarm { node, cell });
        }
        if action != MaintenanceAction::None {
            let sleepers: Vec<NodeId> = self.rosters[&cell]
                .members
                .iter()
                .copied()
                .filter(|m| *m != node && self.nodes[m.index()].alive && self.nodes[m.index()].gaf_state == GafState::Sleep)
                .collect();
            for s in &sleepers {
                self.nodes[s.index()].gaf_state = GafState::Discovery;
            }
            self.trace.push(self.now, TraceEvent::Wake { cell, nodes: sleepers });
            self.apply_action(cell, action);
        }
        self.apply_roles();
    }

    fn on_death(&mut self, id: NodeId) {
        self.trace.push(self.now, TraceEvent::NodeDeath { node: id });
        if self.grid() {
            if let Some(cell) = self.supervised_cell(id) {
                let action = maintenance_check(&self.rosters[&cell], &self.nodes, &self.layout, self.cfg.handover_threshold);
                self.apply_action(cell, action);
            }
            self.refresh_rosters();
            self.apply_roles();
        } else {
            self.nodes[id.index()].role = Role::Common;
            self.nodes[id.index()].gaf_state = GafState::Sleep;
        }
        for f in 0..self.flows.len() {
            if self.flows[f].src == id || self.flows[f].dst == id {
                self.mark_unroutable(f, "endpoint dead", true);
            }
        }
    }

    // ---- data ----

    fn drop_packet(&mut self, pkt: &DataPacket, reason: &str) {
        self.trace.push(
            self.now,
            TraceEvent::Dropped { flow: pkt.flow, packet: pkt.id, retx: pkt.retx_count, reason: reason.to_string() },
        );
    }

    fn on_packet_send(&mut self, f: usize) {
        let next = self.now + self.flows[f].interval;
        if next < self.flows[f].stop && next < self.cfg.duration {
            self.queue.push(next, EventKind::PacketSend { flow: f });
        }
        let (src, dst) = (self.flows[f].src, self.flows[f].dst);
        if !self.nodes[src.index()].alive {
            return;
        }
        let mut pkt = DataPacket {
            flow: f,
            id: self.next_packet,
            src,
            dst,
            size_bits: self.flows[f].bits,
            created_t: self.now,
            hops_taken: vec![src],
            retx_count: 0,
        };
        self.next_packet += 1;
        self.trace.push(
            self.now,
            TraceEvent::PacketSend { flow: f, packet: pkt.id, src, dst, bits: pkt.size_bits },
        );

        let mut rediscovered = false;
        if self.flows[f].route.is_none() {
            if self.now - self.flows[f].last_attempt >= self.cfg.maintenance_interval {
                self.flows[f].last_attempt = self.now;
                rediscovered = true;
                self.rediscover(Some(f));
            }
            if self.flows[f].route.is_none() {
                self.drop_packet(&pkt, "no route");
                return;
            }
        }
        self.forward(&mut pkt, rediscovered);
    }

    /// Walks the packet along its flow's route. A hop that has drifted out of
    /// range is re-probed once (`gbdeer` only); a dead or unreachable hop
    /// triggers one rediscovery, after which the packet continues from its
    /// current holder if the new route passes through it.
    fn forward(&mut self, pkt: &mut DataPacket, mut rediscovered: bool) {
        let f = pkt.flow;
        let p = self.cfg.energy_params;
        let mut idx = 0usize;
        let mut hops_done = 0usize;
        loop {
            let Some(route) = self.flows[f].route.as_ref() else {
                self.drop_packet(pkt, "no route");
                return;
            };
            if idx + 1 >= route.path.hops.len() {
                break;
            }
            let (u, v) = (route.path.hops[idx], route.path.hops[idx + 1]);
            let mut link = route.links[idx];
            let mut failure: Option<&'static str> = None;
            if !self.nodes[u.index()].alive {
                failure = Some("holder dead");
            } else if !self.nodes[v.index()].alive {
                failure = Some("next hop dead");
            } else {
                let d = self.nodes[u.index()].pos.dist(self.nodes[v.index()].pos);
                if d > link.effective_range {
                    if self.protocol == Protocol::Gbdeer {
                        pkt.retx_count += 1;
                        match self.probe_link(u, v) {
                            Ok(l) => {
                                link = l;
                                if let Some(r) = self.flows[f].route.as_mut() {
                                    r.links[idx] = l;
                                    r.path.hop_levels[idx] = Some(l.level.level);
                                }
                            }
                            Err(_) => failure = Some("hop unreachable"),
                        }
                    } else {
                        failure = Some("hop out of range");
                    }
                }
            }

            if let Some(reason) = failure {
                if rediscovered {
                    self.drop_packet(pkt, reason);
                    return;
                }
                rediscovered = true;
                self.flows[f].last_attempt = self.now;
                self.rediscover(Some(f));
                let holder = *pkt.hops_taken.last().expect("packet starts at its source");
                idx = self.flows[f]
                    .route
                    .as_ref()
                    .and_then(|r| r.path.hops.iter().position(|&h| h == holder))
                    .unwrap_or(0);
                continue;
            }

            self.charge(u, Cause::Tx, tx_cost(link.level, pkt.size_bits, &p));
            self.charge(v, Cause::Rx, rx_cost(pkt.size_bits, &p));
            self.trace.push(
                self.now,
                TraceEvent::PacketHop { flow: f, packet: pkt.id, from: u, to: v, level: link.level.level, bits: pkt.size_bits },
            );
            pkt.hops_taken.push(v);
            hops_done += 1;
            idx += 1;
        }
        let delay = hops_done as f64 * self.cfg.hop_latency;
        self.trace.push(
            self.now,
            TraceEvent::Delivered { flow: f, packet: pkt.id, hops: hops_done, delay, retx: pkt.retx_count },
        );
    }

    // ---- invariant checks ----

    fn check_invariants(&mut self) {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.e_res > self.prev_energy[i] {
                self.violations.push(format!("t={} node {}: energy increased", self.now, n.id));
            }
            if !(0.0..=n.e_init).contains(&n.e_res) || n.alive != (n.e_res > 0.0) {
                self.violations.push(format!("t={} node {}: bad energy state", self.now, n.id));
            }
            self.prev_energy[i] = n.e_res;
        }
        if self.grid() {
            let home: BTreeMap<NodeId, CellIndex> = self.supervisors().into_iter().collect();
            let mut active: BTreeMap<CellIndex, usize> = BTreeMap::new();
            for n in self.nodes.iter().filter(|n| n.alive && n.gaf_state == GafState::Active) {
                let here = self.layout.cell_of_clamped(n.pos);
                // A supervisor that crossed within the alarm guard still counts at home.
                let just_left = home.get(&n.id).filter(|&&c| {
                    c != here && self.layout.cell_of_clamped(n.pos - n.vel * (2.0 * DEPART_GUARD)) == c
                });
                *active.entry(just_left.copied().unwrap_or(here)).or_default() += 1;
            }
            for (c, k) in active {
                if k > 1 {
                    self.violations.push(format!("t={} cell {c}: {k} active nodes", self.now));
                }
            }
        }
    }

    fn check_ledger(&mut self) {
        for n in &self.nodes {
            let spent = self.ledger.node_total(n.id.index());
            if ((n.e_init - n.e_res) - spent).abs() > 1e-9 {
                self.violations.push(format!("t={} node {}: ledger does not close", self.now, n.id));
            }
        }
    }
}

