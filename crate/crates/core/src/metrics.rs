//! Outcome statistics and the comparison baselines.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyLedger;
use crate::engine::trace::{TraceEvent, TraceRow};
use crate::engine::{run, RunOutput};
use crate::error::{Error, Result};
use crate::model::{NodeId, NodeState, Protocol, ScenarioConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delivered: u64,
    pub dropped: u64,
    pub retransmissions: u64,
    pub delivery_ratio: f64,
    /// Mean over delivered packets; 0 when nothing was delivered.
    pub mean_e2e_delay: f64,
    pub energy_total: f64,
    pub energy_per_node: Vec<f64>,
    /// First node death.
    pub first_death_t: Option<f64>,
    /// First instant some flow became unroutable and stayed that way.
    pub network_lifetime_t: Option<f64>,
    pub partition_count: u64,
    pub handover_count: u64,
    pub rediscovery_count: u64,
    pub segment_count: u64,
    /// Bandwidth utilization: total bits put on the air, data plus control.
    pub bits_transmitted: u64,
}

impl Metrics {
    pub fn generated(&self) -> u64 {
        self.delivered + self.dropped
    }

    pub fn to_document(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn from_document(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Column names for a comparison table, in document order.
    pub fn csv_header() -> Vec<&'static str> {
        vec![
            "delivered",
            "dropped",
            "retransmissions",
            "delivery_ratio",
            "mean_e2e_delay",
            "energy_total",
            "energy_per_node",
            "first_death_t",
            "network_lifetime_t",
            "partition_count",
            "handover_count",
            "rediscovery_count",
            "segment_count",
            "bits_transmitted",
        ]
    }

    pub fn csv_values(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        vec![
            self.delivered.to_string(),
            self.dropped.to_string(),
            self.retransmissions.to_string(),
            self.delivery_ratio.to_string(),
            self.mean_e2e_delay.to_string(),
            self.energy_total.to_string(),
            self.energy_per_node.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"),
            opt(self.first_death_t),
            opt(self.network_lifetime_t),
            self.partition_count.to_string(),
            self.handover_count.to_string(),
            self.rediscovery_count.to_string(),
            self.segment_count.to_string(),
            self.bits_transmitted.to_string(),
        ]
    }
}

/// Derives every metric from a finished run's trace and energy ledger.
pub fn aggregate(trace: &[TraceRow], ledger: &EnergyLedger) -> Metrics {
    let mut m = Metrics::default();
    let mut delay_sum = 0.0;
    // flow -> time it last became unroutable, cleared when routed again
    let mut unroutable: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    for row in trace {
        match &row.event {
            TraceEvent::Delivered { delay, retx, .. } => {
                m.delivered += 1;
                m.retransmissions += u64::from(*retx);
                delay_sum += delay;
            }
            TraceEvent::Dropped { retx, .. } => {
                m.dropped += 1;
                m.retransmissions += u64::from(*retx);
            }
            TraceEvent::PacketHop { bits, .. } | TraceEvent::ControlTx { bits, .. } => m.bits_transmitted += bits,
            TraceEvent::NodeDeath { .. } => {
                m.first_death_t.get_or_insert(row.t);
            }
            TraceEvent::Partition { flow, .. } => {
                m.partition_count += 1;
                unroutable.entry(*flow).or_insert(None).get_or_insert(row.t);
            }
            TraceEvent::Routed { flow, segments, .. } => {
                m.segment_count += *segments as u64;
                unroutable.insert(*flow, None);
            }
            TraceEvent::Handover { .. } => m.handover_count += 1,
            TraceEvent::Rediscovery { .. } => m.rediscovery_count += 1,
            _ => {}
        }
    }
    let generated = m.delivered + m.dropped;
    m.delivery_ratio = if generated > 0 { m.delivered as f64 / generated as f64 } else { 0.0 };
    m.mean_e2e_delay = if m.delivered > 0 { delay_sum / m.delivered as f64 } else { 0.0 };
    m.energy_per_node = (0..ledger.node_count()).map(|n| ledger.node_total(n)).collect();
    m.energy_total = m.energy_per_node.iter().sum();
    m.network_lifetime_t = unroutable.values().flatten().copied().reduce(f64::min);
    m
}

/// Fewest-hop path over the unit-disk graph of alive nodes with the given
/// radius. Neighbours are explored in id order, so ties resolve to the
/// lexicographically smallest predecessor chain.
pub fn unit_disk_path(nodes: &[NodeState], radius: f64, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
    let alive = |id: NodeId| nodes.get(id.index()).is_some_and(|n| n.alive);
    if !alive(src) || !alive(dst) {
        return None;
    }
    let mut prev: Vec<Option<NodeId>> = vec![None; nodes.len()];
    prev[src.index()] = Some(src);
    let mut queue = VecDeque::from([src]);
    while let Some(x) = queue.pop_front() {
        if x == dst {
            break;
        }
        let px = nodes[x.index()].pos;
        for n in nodes.iter().filter(|n| n.alive) {
            if prev[n.id.index()].is_none() && n.pos.dist(px) <= radius {
                prev[n.id.index()] = Some(x);
                queue.push_back(n.id);
            }
        }
    }
    prev[dst.index()]?;
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur.index()].expect("BFS predecessor chain is complete");
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// Runs one of the comparison protocols on `cfg`.
pub fn run_baseline(cfg: &ScenarioConfig) -> Result<RunOutput> {
    if cfg.protocol == Protocol::Gbdeer {
        return Err(Error::InvalidConfig("baseline protocol is gaf-fixed or minhop".into()));
    }
    run(cfg)
}
