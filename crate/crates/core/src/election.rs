//! Per-cell supervisor and subordinate election.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellIndex;
use crate::model::{NodeId, NodeState};

/// Mix of normalized residual energy and normalized stillness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectionWeights {
    pub energy: f64,
    pub mobility: f64,
}

impl Default for ElectionWeights {
    fn default() -> Self {
        ElectionWeights { energy: 0.5, mobility: 0.5 }
    }
}

impl ElectionWeights {
    pub fn score(&self, node: &NodeState, v_max: f64) -> f64 {
        let energy = if node.e_init > 0.0 { node.e_res / node.e_init } else { 0.0 };
        // With v_max = 0 every node is stationary.
        let stillness = if v_max > 0.0 { 1.0 - node.speed().min(v_max) / v_max } else { 1.0 };
        self.energy * energy + self.mobility * stillness
    }
}

/// Election score with equal weight on energy and stillness.
pub fn weight(node: &NodeState, v_max: f64) -> f64 {
    ElectionWeights::default().score(node, v_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRoster {
    pub cell: CellIndex,
    pub supervisor: Option<NodeId>,
    pub subordinate: Option<NodeId>,
    /// Sorted by id.
    pub members: Vec<NodeId>,
}

impl CellRoster {
    pub fn empty(cell: CellIndex) -> Self {
        CellRoster { cell, supervisor: None, subordinate: None, members: Vec::new() }
    }

    pub fn is_hole(&self) -> bool {
        self.supervisor.is_none()
    }
}

/// Candidates ordered best first: higher score, then lower id.
fn ranked<'a>(nodes: impl IntoIterator<Item = &'a NodeState>, v_max: f64, w: &ElectionWeights) -> Vec<(f64, NodeId)> {
    let mut scored: Vec<(f64, NodeId)> = nodes
        .into_iter()
        .filter(|n| n.alive)
        .map(|n| (w.score(n, v_max), n.id))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
}

pub fn elect_weighted<'a>(
    cell: CellIndex,
    nodes: impl IntoIterator<Item = &'a NodeState>,
    v_max: f64,
    w: &ElectionWeights,
) -> CellRoster {
    let order = ranked(nodes, v_max, w);
    let mut members: Vec<NodeId> = order.iter().map(|(_, id)| *id).collect();
    members.sort();
    CellRoster {
        cell,
        supervisor: order.first().map(|(_, id)| *id),
        subordinate: order.get(1).map(|(_, id)| *id),
        members,
    }
}

/// Elects the best-scoring alive node as supervisor and the runner-up as
/// subordinate. Dead nodes are ignored; an empty set yields a hole.
pub fn elect<'a>(cell: CellIndex, nodes: impl IntoIterator<Item = &'a NodeState>, v_max: f64) -> CellRoster {
    elect_weighted(cell, nodes, v_max, &ElectionWeights::default())
}

pub fn promote_weighted<'a>(
    roster: &CellRoster,
    nodes: impl IntoIterator<Item = &'a NodeState>,
    v_max: f64,
    w: &ElectionWeights,
) -> Result<CellRoster> {
    let nodes: Vec<&NodeState> = nodes.into_iter().filter(|n| n.alive).collect();
    let new_sup = roster
        .subordinate
        .filter(|s| nodes.iter().any(|n| n.id == *s))
        .ok_or(Error::NoSupervisor(roster.cell))?;
    let outgoing = roster.supervisor;
    let subordinate = ranked(
        nodes.iter().copied().filter(|n| n.id != new_sup && Some(n.id) != outgoing),
        v_max,
        w,
    )
    .first()
    .map(|(_, id)| *id);
    let mut members: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
    members.sort();
    Ok(CellRoster { cell: roster.cell, supervisor: Some(new_sup), subordinate, members })
}

/// Hands the cell to its subordinate and elects a fresh subordinate.
///
/// `nodes` are the current occupants of the cell. The outgoing supervisor may
/// still be among them (energy handover) but is never re-chosen. Fails with
/// [`Error::NoSupervisor`] when there is no live subordinate to promote.
pub fn promote<'a>(roster: &CellRoster, nodes: impl IntoIterator<Item = &'a NodeState>, v_max: f64) -> Result<CellRoster> {
    promote_weighted(roster, nodes, v_max, &ElectionWeights::default())
}
