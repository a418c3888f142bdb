//! Event trace: everything the engine did, in execution order.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::CellIndex;
use crate::model::{ControlKind, Level, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TraceEvent {
    PacketSend { flow: usize, packet: u64, src: NodeId, dst: NodeId, bits: u64 },
    PacketHop { flow: usize, packet: u64, from: NodeId, to: NodeId, level: Level, bits: u64 },
    Delivered { flow: usize, packet: u64, hops: usize, delay: f64, retx: u32 },
    Dropped { flow: usize, packet: u64, retx: u32, reason: String },
    Handshake { from: NodeId, to: NodeId, level: Option<Level>, attempts: usize },
    ControlTx { kind: ControlKind, sender: NodeId, receiver: Option<NodeId>, level: Level, bits: u64, listeners: usize },
    Handover { cell: CellIndex, old: NodeId, new: NodeId },
    Reelect { cell: CellIndex, old: Option<NodeId>, new: Option<NodeId> },
    Routed { flow: usize, hops: Vec<NodeId>, segments: usize },
    Partition { flow: usize, reason: String },
    Rediscovery { flow: Option<usize> },
    RangeSaturated { from: NodeId, to: NodeId },
    Wake { cell: CellIndex, nodes: Vec<NodeId> },
    DepartAlarm { node: NodeId, cell: CellIndex },
    NodeDeath { node: NodeId },
    Maintenance,
    MobilityTick,
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::PacketSend { .. } => "PacketSend",
            TraceEvent::PacketHop { .. } => "PacketHop",
            TraceEvent::Delivered { .. } => "Delivered",
            TraceEvent::Dropped { .. } => "Dropped",
            TraceEvent::Handshake { .. } => "Handshake",
            TraceEvent::ControlTx { .. } => "ControlTx",
            TraceEvent::Handover { .. } => "Handover",
            TraceEvent::Reelect { .. } => "Reelect",
            TraceEvent::Routed { .. } => "Routed",
            TraceEvent::Partition { .. } => "Partition",
            TraceEvent::Rediscovery { .. } => "Rediscovery",
            TraceEvent::RangeSaturated { .. } => "RangeSaturated",
            TraceEvent::Wake { .. } => "Wake",
            TraceEvent::DepartAlarm { .. } => "DepartAlarm",
            TraceEvent::NodeDeath { .. } => "NodeDeath",
            TraceEvent::Maintenance => "Maintenance",
            TraceEvent::MobilityTick => "MobilityTick",
        }
    }

    fn subjects(&self) -> Vec<NodeId> {
        match self {
            TraceEvent::PacketSend { src, dst, .. } => vec![*src, *dst],
            TraceEvent::PacketHop { from, to, .. }
            | TraceEvent::Handshake { from, to, .. }
            | TraceEvent::RangeSaturated { from, to } => vec![*from, *to],
            TraceEvent::ControlTx { sender, receiver, .. } => std::iter::once(*sender).chain(*receiver).collect(),
            TraceEvent::Handover { old, new, .. } => vec![*old, *new],
            TraceEvent::Reelect { old, new, .. } => old.iter().chain(new.iter()).copied().collect(),
            TraceEvent::Routed { hops, .. } => hops.clone(),
            TraceEvent::Wake { nodes, .. } => nodes.clone(),
            TraceEvent::DepartAlarm { node, .. } | TraceEvent::NodeDeath { node } => vec![*node],
            _ => Vec::new(),
        }
    }

    fn detail(&self) -> String {
        let mut s = String::new();
        let opt = |l: &Option<Level>| l.map_or("none".to_string(), |l| l.to_string());
        match self {
            TraceEvent::PacketSend { flow, packet, bits, .. } => {
                write!(s, "flow={flow} packet={packet} bits={bits}")
            }
            TraceEvent::PacketHop { flow, packet, level, bits, .. } => {
                write!(s, "flow={flow} packet={packet} level={level} bits={bits}")
            }
            TraceEvent::Delivered { flow, packet, hops, delay, retx } => {
                write!(s, "flow={flow} packet={packet} hops={hops} delay={delay} retx={retx}")
            }
            TraceEvent::Dropped { flow, packet, retx, reason } => {
                write!(s, "flow={flow} packet={packet} retx={retx} reason={reason}")
            }
            TraceEvent::Handshake { level, attempts, .. } => {
                let outcome = if level.is_some() { "ok" } else { "unreachable" };
                write!(s, "level={} attempts={attempts} outcome={outcome}", opt(level))
            }
            TraceEvent::ControlTx { kind, level, bits, listeners, .. } => {
                write!(s, "kind={kind:?} level={level} bits={bits} listeners={listeners}")
            }
            TraceEvent::Handover { cell, .. } | TraceEvent::Reelect { cell, .. } | TraceEvent::Wake { cell, .. } => {
                write!(s, "cell={cell}")
            }
            TraceEvent::DepartAlarm { cell, .. } => write!(s, "cell={cell}"),
            TraceEvent::Routed { flow, segments, .. } => write!(s, "flow={flow} segments={segments}"),
            TraceEvent::Partition { flow, reason } => write!(s, "flow={flow} reason={reason}"),
            TraceEvent::Rediscovery { flow } => match flow {
                Some(f) => write!(s, "flow={f}"),
                None => Ok(()),
            },
            TraceEvent::RangeSaturated { .. }
            | TraceEvent::NodeDeath { .. }
            | TraceEvent::Maintenance
            | TraceEvent::MobilityTick => Ok(()),
        }
        .expect("writing to a String cannot fail");
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub seq: u64,
    pub event: TraceEvent,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, event: TraceEvent) {
        let seq = self.rows.len() as u64;
        self.rows.push(TraceRow { t, seq, event });
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.rows.iter().filter(|r| r.event.kind() == kind).count()
    }

    /// Writes `t,seq,kind,subject_ids,detail`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "seq", "kind", "subject_ids", "detail"])?;
        for r in &self.rows {
            let subjects = r.event.subjects().iter().map(ToString::to_string).collect::<Vec<_>>().join(";");
            w.write_record([r.t.to_string(), r.seq.to_string(), r.event.kind().to_string(), subjects, r.event.detail()])?;
        }
        w.flush()?;
        Ok(())
    }
}
