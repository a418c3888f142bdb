//! Random-waypoint mobility and cell depart-time estimation.
//!
//! Positions are evaluated from the start of the current leg rather than by
//! accumulating steps, so a trajectory is bitwise identical no matter how the
//! caller slices time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{CellIndex, GridLayout};
use crate::model::{MobilityParams, NodeId, NodeState, Placement, Vec2};

/// Per-node random stream derived from `(seed, node id)`.
pub fn node_stream(seed: u64, id: NodeId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(id.0) + 1);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Area {
    pub w: f64,
    pub h: f64,
}

impl Area {
    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.w), p.y.clamp(0.0, self.h))
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec2 {
        Vec2::new(rng.random::<f64>() * self.w, rng.random::<f64>() * self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    RandomWaypoint,
    /// One leg, then stationary forever.
    Scripted,
}

#[derive(Clone, Debug)]
pub struct WaypointState {
    pub target: Vec2,
    /// Absolute time at which the current pause ends.
    pub pause_until: f64,
    pub speed: f64,
    /// Incremented every time the node starts or ends a leg.
    pub leg: u64,
    leg_origin: Vec2,
    leg_start: f64,
    moving: bool,
    clock: f64,
    kind: Kind,
    params: MobilityParams,
    area: Area,
    rng: ChaCha8Rng,
}

impl WaypointState {
    /// Starts a random-waypoint node at time 0. The first leg is drawn
    /// immediately from the node's stream.
    pub fn random(node: &mut NodeState, params: MobilityParams, area: Area, rng: ChaCha8Rng) -> Self {
        let mut wp = WaypointState {
            target: node.pos,
            pause_until: 0.0,
            speed: 0.0,
            leg: 0,
            leg_origin: node.pos,
            leg_start: 0.0,
            moving: false,
            clock: 0.0,
            kind: Kind::RandomWaypoint,
            params,
            area,
            rng,
        };
        wp.begin_leg(node, 0.0);
        wp
    }

    /// A node that sits still until `placement.start`, then travels once to
    /// its target and stops there.
    pub fn scripted(node: &mut NodeState, placement: &Placement, area: Area) -> Self {
        let target = placement.target.map_or(node.pos, |t| area.clamp(t));
        let has_leg = placement.target.is_some() && placement.speed > 0.0;
        let mut wp = WaypointState {
            target,
            pause_until: if has_leg { placement.start } else { f64::INFINITY },
            speed: placement.speed,
            leg: 0,
            leg_origin: node.pos,
            leg_start: 0.0,
            moving: false,
            clock: 0.0,
            kind: Kind::Scripted,
            params: MobilityParams { v_min: placement.speed, v_max: placement.speed, pause: f64::INFINITY },
            area,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        if has_leg && placement.start <= 0.0 {
            wp.start_scripted(node, 0.0);
        }
        node.vel = wp.velocity();
        wp
    }

    /// Builds a waypoint state directly from a target and speed.
    pub fn heading(node: &NodeState, target: Vec2, speed: f64, params: MobilityParams, area: Area, rng: ChaCha8Rng) -> Self {
        let mut wp = WaypointState {
            target,
            pause_until: 0.0,
            speed,
            leg: 1,
            leg_origin: node.pos,
            leg_start: 0.0,
            moving: speed > 0.0 && target != node.pos,
            clock: 0.0,
            kind: Kind::RandomWaypoint,
            params,
            area,
            rng,
        };
        if !wp.moving {
            wp.speed = 0.0;
        }
        wp
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_moving(&self) -> bool {
        self.moving
    }

    /// Absolute time at which the current leg or pause ends, if ever.
    pub fn next_change(&self) -> Option<f64> {
        if self.moving {
            Some(self.leg_start + self.target.dist(self.leg_origin) / self.speed)
        } else if self.pause_until.is_finite() {
            Some(self.pause_until.max(self.clock))
        } else {
            None
        }
    }

    fn velocity(&self) -> Vec2 {
        if !self.moving {
            return Vec2::ZERO;
        }
        let d = self.target - self.leg_origin;
        let len = d.norm();
        if len == 0.0 {
            Vec2::ZERO
        } else {
            d * (self.speed / len)
        }
    }

    fn begin_leg(&mut self, node: &mut NodeState, t: f64) {
        match self.kind {
            Kind::RandomWaypoint => {
                self.target = self.area.sample(&mut self.rng);
                self.speed = if self.params.v_min == self.params.v_max {
                    self.params.v_min
                } else {
                    self.rng.random_range(self.params.v_min..=self.params.v_max)
                };
            }
            Kind::Scripted => {
                self.pause_until = f64::INFINITY;
                return;
            }
        }
        self.leg_origin = node.pos;
        self.leg_start = t;
        self.moving = self.speed > 0.0;
        self.leg += 1;
        node.vel = self.velocity();
    }

    fn start_scripted(&mut self, node: &mut NodeState, t: f64) {
        self.leg_origin = node.pos;
        self.leg_start = t;
        self.moving = self.speed > 0.0 && self.target != node.pos;
        self.leg += 1;
        node.vel = self.velocity();
    }

    /// Moves the node along its trajectory up to absolute time `t`.
    pub fn advance_to(&mut self, node: &mut NodeState, t: f64) {
        while self.clock < t || (!self.moving && self.pause_until <= t) {
            if !self.moving {
                if t < self.pause_until || self.pause_until.is_infinite() {
                    node.vel = Vec2::ZERO;
                    self.clock = t;
                    break;
                }
                self.clock = self.pause_until;
                match self.kind {
                    Kind::RandomWaypoint => self.begin_leg(node, self.clock),
                    Kind::Scripted => {
                        let at = self.clock;
                        self.start_scripted(node, at);
                        self.pause_until = f64::INFINITY;
                    }
                }
                if !self.moving {
                    // Zero-speed leg: the node stays put for good.
                    self.pause_until = f64::INFINITY;
                }
                continue;
            }
            let length = self.target.dist(self.leg_origin);
            let arrival = self.leg_start + length / self.speed;
            if t < arrival {
                let dir = (self.target - self.leg_origin) * (1.0 / length);
                node.pos = self.area.clamp(self.leg_origin + dir * (self.speed * (t - self.leg_start)));
                node.vel = dir * self.speed;
                self.clock = t;
            } else {
                node.pos = self.target;
                node.vel = Vec2::ZERO;
                self.moving = false;
                self.clock = arrival;
                self.pause_until = match self.kind {
                    Kind::RandomWaypoint => arrival + self.params.pause,
                    Kind::Scripted => f64::INFINITY,
                };
                self.leg += 1;
            }
        }
    }
}

/// Advances a copy of `node` and `wp` by `dt` seconds.
pub fn advance(node: &NodeState, wp: &WaypointState, dt: f64) -> (NodeState, WaypointState) {
    let mut n = node.clone();
    let mut w = wp.clone();
    let t = w.clock + dt;
    w.advance_to(&mut n, t);
    (n, w)
}

/// Time until straight-line motion at the current velocity leaves `cell`.
/// `None` for a stationary node.
pub fn depart_time(node: &NodeState, cell: CellIndex, layout: &GridLayout) -> Option<f64> {
    let (lo, hi) = layout.bounds(cell);
    let axis = |p: f64, v: f64, lo: f64, hi: f64| -> Option<f64> {
        if v > 0.0 {
            Some(((hi - p) / v).max(0.0))
        } else if v < 0.0 {
            Some(((p - lo) / -v).max(0.0))
        } else {
            None
        }
    };
    match (axis(node.pos.x, node.vel.x, lo.x, hi.x), axis(node.pos.y, node.vel.y, lo.y, hi.y)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}
