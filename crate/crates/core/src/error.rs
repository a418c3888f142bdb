use thiserror::Error;

use crate::grid::CellIndex;
use crate::model::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration invariant does not hold. The payload names the invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("position ({x}, {y}) lies outside the deployment area")]
    OutOfArea { x: f64, y: f64 },

    #[error("cannot build a spanning tree over an empty supervisor set")]
    EmptySupervisorSet,

    #[error("no route from node {src} to node {dst}: {reason}")]
    NoRoute {
        src: NodeId,
        dst: NodeId,
        reason: &'static str,
    },

    #[error("cell {0} has no supervisor")]
    NoSupervisor(CellIndex),

    #[error("unknown protocol `{0}` (valid: gbdeer, gaf-fixed, minhop)")]
    UnknownProtocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
