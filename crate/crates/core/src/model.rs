//! Shared domain types and the scenario configuration.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};

/// A 2-D vector in meters (positions) or meters/second (velocities).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Dense node identifier, `0..n_nodes`. Doubles as the tie-breaker everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Supervisor,
    Subordinate,
    Common,
}

/// Radio state of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GafState {
    Discovery,
    Active,
    Sleep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub pos: Vec2,
    pub vel: Vec2,
    pub e_init: f64,
    pub e_res: f64,
    pub role: Role,
    pub gaf_state: GafState,
    pub alive: bool,
}

impl NodeState {
    pub fn new(id: NodeId, pos: Vec2, e_init: f64) -> Self {
        NodeState {
            id,
            pos,
            vel: Vec2::ZERO,
            e_init,
            e_res: e_init,
            role: Role::Common,
            gaf_state: GafState::Discovery,
            alive: e_init > 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.vel.norm()
    }

    pub fn set_role(&mut self, role: Role) {
        self.role = role;
        self.gaf_state = match role {
            Role::Supervisor => GafState::Active,
            Role::Subordinate | Role::Common => GafState::Sleep,
        };
    }
}

/// One of the three discrete transmission settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Tmin,
    Tmid,
    Tmax,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Tmin, Level::Tmid, Level::Tmax];

    /// 1-based rank; also the number of handshake attempts needed to reach it.
    pub fn rank(self) -> usize {
        match self {
            Level::Tmin => 1,
            Level::Tmid => 2,
            Level::Tmax => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Tmin => "Tmin",
            Level::Tmid => "Tmid",
            Level::Tmax => "Tmax",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLevel {
    pub level: Level,
    pub range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityParams {
    pub v_min: f64,
    pub v_max: f64,
    pub pause: f64,
}

/// A constant-bitrate flow between two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub src: NodeId,
    pub dst: NodeId,
    pub packet_size_bits: u64,
    pub interval: f64,
    pub start: f64,
    pub stop: f64,
}

/// Fixed initial position for a node, optionally with a single scripted leg:
/// the node waits until `start`, then moves to `target` at `speed` and stays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub target: Option<Vec2>,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub start: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "gbdeer")]
    Gbdeer,
    #[serde(rename = "gaf-fixed")]
    GafFixed,
    #[serde(rename = "minhop")]
    Minhop,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Gbdeer, Protocol::GafFixed, Protocol::Minhop];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Gbdeer => "gbdeer",
            Protocol::GafFixed => "gaf-fixed",
            Protocol::Minhop => "minhop",
        }
    }

    pub fn uses_grid(self) -> bool {
        !matches!(self, Protocol::Minhop)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownProtocol(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlKind {
    ListenCtrl,
    AckListenCtrl,
    SupervisorError,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPacket {
    pub kind: ControlKind,
    pub sender: NodeId,
    /// `None` for broadcasts.
    pub receiver: Option<NodeId>,
    pub level: PowerLevel,
    pub timestamp: f64,
}

impl ControlPacket {
    pub fn listen(sender: NodeId, receiver: NodeId, level: PowerLevel, t: f64) -> Self {
        ControlPacket {
            kind: ControlKind::ListenCtrl,
            sender,
            receiver: Some(receiver),
            level,
            timestamp: t,
        }
    }

    /// The acknowledgment answering this probe, sent back at the same level.
    pub fn ack(&self, t: f64) -> Option<Self> {
        if self.kind != ControlKind::ListenCtrl {
            return None;
        }
        Some(ControlPacket {
            kind: ControlKind::AckListenCtrl,
            sender: self.receiver?,
            receiver: Some(self.sender),
            level: self.level,
            timestamp: t,
        })
    }
}

fn default_control_bits() -> u64 {
    64
}

fn default_hop_latency() -> f64 {
    0.002
}

fn default_mobility_tick() -> f64 {
    1.0
}

fn default_half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_w: f64,
    pub area_h: f64,
    pub n_nodes: u32,
    #[serde(rename = "radio_range_R")]
    pub radio_range_r: f64,
    pub power_table: Vec<PowerLevel>,
    pub e_init: f64,
    pub energy_params: EnergyParams,
    pub handover_threshold: f64,
    pub maintenance_interval: f64,
    pub mobility: MobilityParams,
    #[serde(default)]
    pub traffic: Vec<Flow>,
    pub duration: f64,
    pub seed: u64,
    pub protocol: Protocol,

    /// Size of Listen_ctrl, ACK and supervisor-error packets.
    #[serde(default = "default_control_bits")]
    pub control_packet_bits: u64,
    /// Fixed per-hop latency used for end-to-end delay.
    #[serde(default = "default_hop_latency")]
    pub hop_latency: f64,
    #[serde(default = "default_mobility_tick")]
    pub mobility_tick: f64,
    #[serde(default = "default_half")]
    pub weight_energy: f64,
    #[serde(default = "default_half")]
    pub weight_mobility: f64,
    #[serde(default)]
    pub placement: Vec<Placement>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_w: 1000.0,
            area_h: 1000.0,
            n_nodes: 100,
            radio_range_r: 250.0,
            power_table: vec![
                PowerLevel { level: Level::Tmin, range: 80.0 },
                PowerLevel { level: Level::Tmid, range: 160.0 },
                PowerLevel { level: Level::Tmax, range: 250.0 },
            ],
            e_init: 5.0,
            energy_params: EnergyParams::default(),
            handover_threshold: 0.5,
            maintenance_interval: 1.0,
            mobility: MobilityParams { v_min: 0.0, v_max: 5.0, pause: 10.0 },
            traffic: Vec::new(),
            duration: 300.0,
            seed: 1,
            protocol: Protocol::Gbdeer,
            control_packet_bits: default_control_bits(),
            hop_latency: default_hop_latency(),
            mobility_tick: default_mobility_tick(),
            weight_energy: 0.5,
            weight_mobility: 0.5,
            placement: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn range_of(&self, level: Level) -> Option<f64> {
        self.power_table.iter().find(|p| p.level == level).map(|p| p.range)
    }
}

fn check(ok: bool, invariant: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(invariant.to_string()))
    }
}

fn finite_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Checks every configuration invariant and returns the config with its power
/// table ordered Tmin, Tmid, Tmax. The error names the first violated one.
pub fn validate_config(mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
    check(finite_pos(cfg.area_w), "area_w > 0")?;
    check(finite_pos(cfg.area_h), "area_h > 0")?;
    check(cfg.n_nodes > 0, "n_nodes > 0")?;

    check(cfg.power_table.len() == 3, "power_table has exactly three levels")?;
    for level in Level::ALL {
        let n = cfg.power_table.iter().filter(|p| p.level == level).count();
        if n != 1 {
            return Err(Error::InvalidConfig(format!(
                "power_table has exactly one {level} entry"
            )));
        }
    }
    cfg.power_table.sort_by_key(|p| p.level);
    let [lo, mid, hi] = [0, 1, 2].map(|i| cfg.power_table[i].range);
    check(lo.is_finite() && lo > 0.0, "range(Tmin) > 0")?;
    check(lo < mid, "range(Tmin) < range(Tmid)")?;
    check(mid < hi && hi.is_finite(), "range(Tmid) < range(Tmax)")?;
    check(cfg.radio_range_r == hi, "radio_range_R = range(Tmax)")?;

    check(finite_pos(cfg.e_init), "e_init > 0")?;
    check(finite_nonneg(cfg.handover_threshold), "handover_threshold >= 0")?;
    check(cfg.handover_threshold < cfg.e_init, "handover_threshold < e_init")?;

    let ep = &cfg.energy_params;
    check(
        [ep.e_elec, ep.e_amp, ep.p_idle, ep.p_sleep].into_iter().all(finite_nonneg),
        "energy_params non-negative",
    )?;
    check(ep.p_sleep < ep.p_idle, "p_sleep < p_idle")?;

    check(finite_pos(cfg.maintenance_interval), "maintenance_interval > 0")?;
    check(finite_pos(cfg.mobility_tick), "mobility_tick > 0")?;
    let m = &cfg.mobility;
    check(finite_nonneg(m.v_min), "v_min >= 0")?;
    check(m.v_max.is_finite() && m.v_min <= m.v_max, "v_min <= v_max")?;
    check(finite_nonneg(m.pause), "pause >= 0")?;

    check(finite_nonneg(cfg.hop_latency), "hop_latency >= 0")?;
    check(
        finite_nonneg(cfg.weight_energy) && finite_nonneg(cfg.weight_mobility),
        "election weights non-negative",
    )?;

    for f in &cfg.traffic {
        check(f.src.0 < cfg.n_nodes && f.dst.0 < cfg.n_nodes, "flow endpoints < n_nodes")?;
        check(f.src != f.dst, "flow src != dst")?;
        check(finite_pos(f.interval), "flow interval > 0")?;
        check(finite_nonneg(f.start) && f.stop.is_finite(), "flow start >= 0")?;
        check(f.start <= f.stop, "flow start <= stop")?;
    }

    let mut seen = vec![false; cfg.n_nodes as usize];
    for p in &cfg.placement {
        check(p.id.0 < cfg.n_nodes, "placement id < n_nodes")?;
        check(!seen[p.id.index()], "placement ids unique")?;
        seen[p.id.index()] = true;
        let inside = |v: Vec2| v.x >= 0.0 && v.x < cfg.area_w && v.y >= 0.0 && v.y < cfg.area_h;
        check(inside(Vec2::new(p.x, p.y)), "placement inside area")?;
        check(p.target.is_none_or(inside), "placement target inside area")?;
        check(finite_nonneg(p.speed) && finite_nonneg(p.start), "placement speed, start >= 0")?;
    }

    check(cfg.duration.is_finite() && cfg.duration > 0.0, "duration > 0")?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expect_err(cfg: ScenarioConfig, needle: &str) {
        match validate_config(cfg) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains(needle), "{msg}"),
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn default_config_is_valid_and_unchanged() {
        let cfg = ScenarioConfig::default();
        assert_eq!(validate_config(cfg.clone()).unwrap(), cfg);
    }

    #[test]
    fn zero_duration_rejected() {
        expect_err(ScenarioConfig { duration: 0.0, ..Default::default() }, "duration > 0");
    }

    #[test]
    fn threshold_equal_to_e_init_rejected() {
        expect_err(
            ScenarioConfig { handover_threshold: 5.0, ..Default::default() },
            "handover_threshold < e_init",
        );
    }

    #[test]
    fn power_table_is_normalized_by_level() {
        let mut cfg = ScenarioConfig::default();
        cfg.power_table.reverse();
        let out = validate_config(cfg).unwrap();
        assert_eq!(out.power_table, ScenarioConfig::default().power_table);
    }

    #[test]
    fn out_of_order_ranges_name_the_invariant() {
        let mut cfg = ScenarioConfig::default();
        cfg.power_table[0].range = 200.0;
        expect_err(cfg, "range(Tmin) < range(Tmid)");
    }

    #[test]
    fn radio_range_must_match_tmax() {
        expect_err(
            ScenarioConfig { radio_range_r: 200.0, ..Default::default() },
            "radio_range_R = range(Tmax)",
        );
    }

    #[test]
    fn toml_round_trip_uses_spec_field_names() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml_string();
        assert!(text.contains("radio_range_R"));
        assert!(text.contains("protocol = \"gbdeer\""));
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_field_is_named() {
        let text = ScenarioConfig::default().to_toml_string().replace("duration = 300.0\n", "");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("duration"), "{err}");
    }

    #[test]
    fn ack_copies_probe_level() {
        let lvl = PowerLevel { level: Level::Tmid, range: 160.0 };
        let probe = ControlPacket::listen(NodeId(1), NodeId(2), lvl, 3.0);
        let ack = probe.ack(3.5).unwrap();
        assert_eq!(ack.level, probe.level);
        assert_eq!(ack.sender, NodeId(2));
        assert_eq!(ack.kind, ControlKind::AckListenCtrl);
    }

    #[test]
    fn protocol_names_parse() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        let err = "bogus".parse::<Protocol>().unwrap_err().to_string();
        assert!(err.contains("gbdeer") && err.contains("minhop"));
    }
}
