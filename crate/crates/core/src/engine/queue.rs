use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    NodeDeath(NodeId),
    Maintenance,
    DepartAlarm { node: NodeId, generation: u64 },
    PacketHop,
    PacketSend { flow: usize },
    MobilityTick,
    Rediscovery,
}

impl EventKind {
    /// Execution order among events at the same instant. Deaths come first
    /// so routing decisions never see a node that is already drained.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::NodeDeath(_) => 0,
            EventKind::Maintenance => 1,
            EventKind::DepartAlarm { .. } => 2,
            EventKind::PacketHop => 3,
            EventKind::PacketSend { .. } => 4,
            EventKind::MobilityTick => 5,
            EventKind::Rediscovery => 6,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub t: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.t, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2))
    }
}

/// Pending events, popped in `(t, kind rank, seq)` order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { t, seq, kind });
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_instant_follows_kind_rank() {
        let mut q = EventQueue::new();
        q.push(1.0, EventKind::Rediscovery);
        q.push(1.0, EventKind::PacketSend { flow: 0 });
        q.push(1.0, EventKind::Maintenance);
        q.push(1.0, EventKind::NodeDeath(NodeId(4)));
        q.push(0.5, EventKind::MobilityTick);
        let order: Vec<u8> = std::iter::from_fn(|| q.pop()).map(|e| e.kind.rank()).collect();
        assert_eq!(order, vec![5, 0, 1, 4, 6]);
    }

    proptest! {
        #[test]
        fn pops_in_key_order(items in prop::collection::vec((0u8..20, 0usize..3), 1..100)) {
            let kinds = [EventKind::Maintenance, EventKind::PacketSend { flow: 1 }, EventKind::MobilityTick];
            let mut q = EventQueue::new();
            for (t, k) in &items {
                q.push(*t as f64 * 0.5, kinds[*k]);
            }
            let mut prev: Option<(f64, u8, u64)> = None;
            while let Some(e) = q.pop() {
                let key = (e.t, e.kind.rank(), e.seq);
                if let Some(p) = prev {
                    prop_assert!(p < key);
                }
                prev = Some(key);
            }
        }
    }
}
