//! Three-level transmission power control.
//!
//! Route discovery probes each link with Listen_ctrl at the lowest level and
//! escalates until an acknowledgment comes back. Route maintenance then
//! stretches or shrinks the effective range of each link as the endpoints
//! move, and the stretched range is quantized back onto the three levels for
//! energy accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Level, NodeId, NodeState, PowerLevel, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    levels: [PowerLevel; 3],
}

impl PowerTable {
    /// Table from the three ranges, lowest first.
    pub fn new(tmin: f64, tmid: f64, tmax: f64) -> Result<Self> {
        if !(tmin > 0.0 && tmin < tmid && tmid < tmax && tmax.is_finite()) {
            return Err(Error::InvalidConfig("range(Tmin) < range(Tmid) < range(Tmax)".into()));
        }
        Ok(PowerTable {
            levels: [
                PowerLevel { level: Level::Tmin, range: tmin },
                PowerLevel { level: Level::Tmid, range: tmid },
                PowerLevel { level: Level::Tmax, range: tmax },
            ],
        })
    }

    pub fn from_levels(levels: &[PowerLevel]) -> Result<Self> {
        let get = |l: Level| {
            levels
                .iter()
                .find(|p| p.level == l)
                .map(|p| p.range)
                .ok_or_else(|| Error::InvalidConfig(format!("power_table has exactly one {l} entry")))
        };
        Self::new(get(Level::Tmin)?, get(Level::Tmid)?, get(Level::Tmax)?)
    }

    pub fn levels(&self) -> &[PowerLevel; 3] {
        &self.levels
    }

    pub fn get(&self, level: Level) -> PowerLevel {
        self.levels[level.rank() - 1]
    }

    pub fn range(&self, level: Level) -> f64 {
        self.get(level).range
    }

    pub fn min_range(&self) -> f64 {
        self.levels[0].range
    }

    pub fn max_range(&self) -> f64 {
        self.levels[2].range
    }

    /// Smallest level whose range covers `range`, saturating at Tmax.
    pub fn quantize(&self, range: f64) -> PowerLevel {
        self.levels
            .iter()
            .copied()
            .find(|p| p.range >= range)
            .unwrap_or(self.levels[2])
    }
}

impl Default for PowerTable {
    fn default() -> Self {
        PowerTable::new(80.0, 160.0, 250.0).expect("default ranges are ordered")
    }
}

/// Lowest level reaching distance `d`, or `None` past Tmax.
pub fn min_sufficient_level(d: f64, table: &PowerTable) -> Option<PowerLevel> {
    table.levels.iter().copied().find(|p| d <= p.range)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub level: PowerLevel,
    /// Listen_ctrl transmissions sent, including the successful one.
    pub attempts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unreachable after {attempts} Listen_ctrl attempts")]
pub struct Unreachable {
    pub attempts: usize,
}

/// Probes the link at Tmin, Tmid, Tmax in turn until the receiver is in
/// range. Energy for the probes and the acknowledgment is charged by the
/// caller, one Listen_ctrl per attempt at that attempt's level.
pub fn handshake(sender: &NodeState, receiver: &NodeState, table: &PowerTable) -> std::result::Result<Handshake, Unreachable> {
    handshake_at_distance(sender.pos.dist(receiver.pos), table)
}

pub fn handshake_at_distance(d: f64, table: &PowerTable) -> std::result::Result<Handshake, Unreachable> {
    for (i, level) in table.levels.iter().enumerate() {
        if d <= level.range {
            return Ok(Handshake { level: *level, attempts: i + 1 });
        }
    }
    Err(Unreachable { attempts: table.levels.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Toward,
    Away,
}

/// Whether `a` and `b` are closing in or separating, from the sign of the
/// rate of change of their distance. A constant distance counts as away.
pub fn classify_direction(a_pos: Vec2, a_vel: Vec2, b_pos: Vec2, b_vel: Vec2) -> Direction {
    let rate = (b_pos - a_pos).dot(b_vel - a_vel);
    if rate < 0.0 {
        Direction::Toward
    } else {
        Direction::Away
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeAdjustment {
    /// Continuous effective range, clamped to `[range(Tmin), range(Tmax)]`.
    pub range: f64,
    /// Level charged for transmissions at this range.
    pub level: PowerLevel,
    /// The unclamped value exceeded `range(Tmax)`.
    pub saturated: bool,
}

/// `base - speed·time` when closing in, `base + speed·time` when separating.
pub fn adjust_range(base: f64, speed: f64, time: f64, direction: Direction, table: &PowerTable) -> RangeAdjustment {
    let shift = speed * time;
    let raw = match direction {
        Direction::Toward => base - shift,
        Direction::Away => base + shift,
    };
    let saturated = raw > table.max_range();
    let range = raw.clamp(table.min_range(), table.max_range());
    RangeAdjustment { range, level: table.quantize(range), saturated }
}

/// Worst-case growth of the separation when both endpoints move apart.
pub fn mutual_separation(speed_s: f64, time_s: f64, speed_d: f64, time_d: f64) -> f64 {
    speed_s * time_s + speed_d * time_d
}

/// Power setting of one route hop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPower {
    pub from: NodeId,
    pub to: NodeId,
    /// Level charged per transmission.
    pub level: PowerLevel,
    /// Range the link is trusted for; drives reachability checks.
    pub effective_range: f64,
    /// Range fixed by the last handshake.
    pub base_range: f64,
    /// Time of the last handshake.
    pub established_at: f64,
}

impl LinkPower {
    pub fn from_handshake(from: NodeId, to: NodeId, hs: Handshake, t: f64) -> Self {
        LinkPower {
            from,
            to,
            level: hs.level,
            effective_range: hs.level.range,
            base_range: hs.level.range,
            established_at: t,
        }
    }

    /// A link pinned at the maximum level with no power control.
    pub fn fixed(from: NodeId, to: NodeId, table: &PowerTable, t: f64) -> Self {
        let level = table.get(Level::Tmax);
        LinkPower { from, to, level, effective_range: level.range, base_range: level.range, established_at: t }
    }

    /// Re-evaluates the effective range at time `t` from the endpoints'
    /// current motion. Separating links grow by the worst-case mutual
    /// separation; closing links shrink by the closing speed.
    pub fn readjust(&mut self, sender: &NodeState, receiver: &NodeState, t: f64, table: &PowerTable) -> RangeAdjustment {
        let elapsed = (t - self.established_at).max(0.0);
        let dir = classify_direction(sender.pos, sender.vel, receiver.pos, receiver.vel);
        let adj = match dir {
            Direction::Away => {
                let grow = mutual_separation(sender.speed(), elapsed, receiver.speed(), elapsed);
                adjust_range(self.base_range, grow, 1.0, dir, table)
            }
            Direction::Toward => {
                let sep = receiver.pos - sender.pos;
                let d = sep.norm();
                let closing = if d > 0.0 { -(sep.dot(receiver.vel - sender.vel)) / d } else { 0.0 };
                adjust_range(self.base_range, closing.max(0.0), elapsed, dir, table)
            }
        };
        self.effective_range = adj.range;
        self.level = adj.level;
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> PowerTable {
        PowerTable::default()
    }

    #[test]
    fn min_level_examples() {
        let t = table();
        assert_eq!(min_sufficient_level(50.0, &t).unwrap().level, Level::Tmin);
        assert_eq!(min_sufficient_level(100.0, &t).unwrap().level, Level::Tmid);
        assert_eq!(min_sufficient_level(300.0, &t), None);
        assert_eq!(min_sufficient_level(0.0, &t).unwrap().level, Level::Tmin);
        assert_eq!(min_sufficient_level(80.0, &t).unwrap().level, Level::Tmin);
    }

    #[test]
    fn handshake_examples() {
        let t = table();
        let hs = handshake_at_distance(100.0, &t).unwrap();
        assert_eq!((hs.level.level, hs.attempts), (Level::Tmid, 2));
        let hs = handshake_at_distance(10.0, &t).unwrap();
        assert_eq!((hs.level.level, hs.attempts), (Level::Tmin, 1));
        assert_eq!(handshake_at_distance(400.0, &t), Err(Unreachable { attempts: 3 }));

        let a = NodeState::new(NodeId(0), Vec2::new(0.0, 0.0), 1.0);
        let b = NodeState::new(NodeId(1), Vec2::new(60.0, 80.0), 1.0);
        assert_eq!(handshake(&a, &b, &t).unwrap().level.level, Level::Tmid);
    }

    #[test]
    fn adjust_range_examples() {
        let t = table();
        let a = adjust_range(160.0, 5.0, 4.0, Direction::Away, &t);
        assert_eq!(a.range, 180.0);
        assert_eq!(a.level.level, Level::Tmax);
        assert!(!a.saturated);
        let a = adjust_range(160.0, 5.0, 4.0, Direction::Toward, &t);
        assert_eq!(a.range, 140.0);
        assert_eq!(a.level.level, Level::Tmid);
        assert_eq!(adjust_range(160.0, 0.0, 4.0, Direction::Away, &t).range, 160.0);
        let a = adjust_range(160.0, 50.0, 4.0, Direction::Away, &t);
        assert_eq!(a.range, 250.0);
        assert!(a.saturated);
        assert_eq!(adjust_range(160.0, 50.0, 4.0, Direction::Toward, &t).range, 80.0);
    }

    #[test]
    fn mutual_separation_examples() {
        assert_eq!(mutual_separation(5.0, 2.0, 3.0, 1.0), 13.0);
        assert_eq!(mutual_separation(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(mutual_separation(3.0, 1.0, 5.0, 2.0), 13.0);
    }

    #[test]
    fn direction_classification() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(100.0, 0.0);
        assert_eq!(classify_direction(a, Vec2::new(1.0, 0.0), b, Vec2::ZERO), Direction::Toward);
        assert_eq!(classify_direction(a, Vec2::new(-1.0, 0.0), b, Vec2::ZERO), Direction::Away);
        assert_eq!(classify_direction(a, Vec2::ZERO, b, Vec2::ZERO), Direction::Away);
    }

    #[test]
    fn static_link_never_changes() {
        let t = table();
        let a = NodeState::new(NodeId(0), Vec2::new(0.0, 0.0), 1.0);
        let b = NodeState::new(NodeId(1), Vec2::new(100.0, 0.0), 1.0);
        let mut link = LinkPower::from_handshake(a.id, b.id, handshake(&a, &b, &t).unwrap(), 0.0);
        let before = link;
        link.readjust(&a, &b, 500.0, &t);
        assert_eq!(link, before);
    }

    proptest! {
        #[test]
        fn escalation_is_minimal(d in 0.0f64..400.0) {
            let t = table();
            match (handshake_at_distance(d, &t), min_sufficient_level(d, &t)) {
                (Ok(hs), Some(l)) => {
                    prop_assert_eq!(hs.level, l);
                    prop_assert_eq!(hs.attempts, l.level.rank());
                }
                (Err(u), None) => prop_assert_eq!(u.attempts, 3),
                (a, b) => prop_assert!(false, "disagree: {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn adjusted_range_is_clamped(base in 0.0f64..400.0, s in 0.0f64..50.0, tm in 0.0f64..100.0, away in any::<bool>()) {
            let t = table();
            let dir = if away { Direction::Away } else { Direction::Toward };
            let a = adjust_range(base, s, tm, dir, &t);
            prop_assert!(a.range >= 80.0 && a.range <= 250.0);
            prop_assert!(a.level.range >= a.range);
        }

        #[test]
        fn separation_is_linear_and_symmetric(a in 0.0f64..50.0, b in 0.0f64..50.0, c in 0.0f64..50.0, d in 0.0f64..50.0) {
            prop_assert_eq!(mutual_separation(a, b, c, d), mutual_separation(c, d, a, b));
            let doubled = mutual_separation(2.0 * a, b, c, d) - mutual_separation(a, b, c, d);
            prop_assert!((doubled - a * b).abs() < 1e-9);
        }
    }
}
