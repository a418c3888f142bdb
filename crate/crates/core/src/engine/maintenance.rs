use std::collections::BTreeMap;

use crate::election::CellRoster;
use crate::grid::{CellIndex, GridLayout};
use crate::model::{GafState, NodeId, NodeState, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaintenanceAction {
    None,
    /// Promote the subordinate.
    Handover,
    /// No usable subordinate: elect from scratch.
    Reelect,
}

/// Decides whether a cell's supervisor must step down.
///
/// A supervisor steps down when it has died, left its cell, or dropped below
/// `threshold`. Leaving or dying always forces a change; a low battery only
/// hands over to a subordinate that is itself above the threshold, otherwise
/// the supervisor keeps serving.
pub fn maintenance_check(roster: &CellRoster, nodes: &[NodeState], layout: &GridLayout, threshold: f64) -> MaintenanceAction {
    let Some(sup) = roster.supervisor else {
        return MaintenanceAction::None;
    };
    let s = &nodes[sup.index()];
    let gone = !s.alive || layout.cell_of_clamped(s.pos) != roster.cell;
    let low = s.e_res < threshold;
    if !gone && !low {
        return MaintenanceAction::None;
    }
    let usable = roster.subordinate.map(|id| &nodes[id.index()]).filter(|n| {
        n.id != sup && n.alive && layout.cell_of_clamped(n.pos) == roster.cell
    });
    match (gone, usable) {
        (_, Some(sub)) if gone || sub.e_res >= threshold => MaintenanceAction::Handover,
        (true, _) => MaintenanceAction::Reelect,
        (false, _) => MaintenanceAction::None,
    }
}

/// Puts supervisors in Active and everyone else to Sleep. Returns the
/// supervisors in cell order.
pub fn gaf_states_tick(rosters: &BTreeMap<CellIndex, CellRoster>, nodes: &mut [NodeState]) -> Vec<NodeId> {
    let mut role: Vec<Role> = vec![Role::Common; nodes.len()];
    let mut supervisors = Vec::new();
    for r in rosters.values() {
        if let Some(s) = r.supervisor {
            role[s.index()] = Role::Supervisor;
            supervisors.push(s);
        }
        if let Some(s) = r.subordinate {
            if role[s.index()] != Role::Supervisor {
                role[s.index()] = Role::Subordinate;
            }
        }
    }
    for n in nodes.iter_mut().filter(|n| n.alive) {
        n.set_role(role[n.id.index()]);
    }
    for n in nodes.iter_mut().filter(|n| !n.alive) {
        n.role = Role::Common;
        n.gaf_state = GafState::Sleep;
    }
    supervisors
}
