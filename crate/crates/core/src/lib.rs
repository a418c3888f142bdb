//! Deterministic discrete-event simulation of grid-based, energy-efficient
//! MANET routing.
//!
//! The deployment area is partitioned into virtual grid cells whose side is
//! `R / √5`, so any node in a cell reaches any node in an edge-adjacent cell.
//! Each cell elects a supervisor (kept awake) and a subordinate (its
//! successor); every other node sleeps. Supervisors are connected by a
//! Euclidean minimum spanning tree, and each tree hop is assigned the lowest
//! of three transmission levels that reaches the next supervisor. Route
//! maintenance hands a cell over to its subordinate when the supervisor runs
//! low on energy or leaves its cell, and stretches or shrinks link ranges as
//! supervisors move.
//!
//! Two baselines share the same engine: `gaf-fixed` (same grid pipeline, every
//! transmission at the maximum level) and `minhop` (breadth-first shortest hop
//! routing over the unit-disk graph of all nodes).

pub mod election;
pub mod energy;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod power;
pub mod routing;

pub use crate::engine::{run, RunOutput};
pub use crate::error::{Error, Result};
pub use crate::metrics::Metrics;
pub use crate::model::{ScenarioConfig, Protocol};
