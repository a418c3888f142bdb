//! Minimum spanning tree over cell supervisors, route extraction, and
//! depth-limited tree segmentation.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::election::CellRoster;
use crate::error::{Error, Result};
use crate::grid::CellIndex;
use crate::model::{Level, NodeId, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    /// Always `u < v`.
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

impl TreeEdge {
    fn new(a: NodeId, b: NodeId, length: f64) -> Self {
        TreeEdge { u: a.min(b), v: a.max(b), length }
    }

    pub fn other(&self, x: NodeId) -> NodeId {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisorTree {
    /// Sorted by id.
    pub vertices: Vec<(NodeId, Vec2)>,
    pub edges: Vec<TreeEdge>,
    pub root: Option<NodeId>,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over the complete Euclidean graph of `supervisors`.
///
/// Edges are considered in `(length, min id, max id)` order, which makes the
/// result unique even when lengths tie.
pub fn build_mst(supervisors: &[(NodeId, Vec2)]) -> Result<SupervisorTree> {
    if supervisors.is_empty() {
        return Err(Error::EmptySupervisorSet);
    }
    let mut vertices = supervisors.to_vec();
    vertices.sort_by_key(|(id, _)| *id);
    vertices.dedup_by_key(|(id, _)| *id);

    let n = vertices.len();
    let mut candidates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, pa) = vertices[i];
            let (b, pb) = vertices[j];
            candidates.push((i, j, TreeEdge::new(a, b, pa.dist(pb))));
        }
    }
    candidates.sort_by(|x, y| {
        x.2.length
            .total_cmp(&y.2.length)
            .then(x.2.u.cmp(&y.2.u))
            .then(x.2.v.cmp(&y.2.v))
    });

    let mut dsu = DisjointSet::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (i, j, e) in candidates {
        if dsu.union(i, j) {
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    Ok(SupervisorTree { vertices, edges, root: None })
}

impl SupervisorTree {
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.vertices.binary_search_by_key(&id, |(v, _)| *v).is_ok()
    }

    pub fn position(&self, id: NodeId) -> Option<Vec2> {
        self.vertices
            .binary_search_by_key(&id, |(v, _)| *v)
            .ok()
            .map(|i| self.vertices[i].1)
    }

    /// Neighbour lists, each sorted by id.
    pub fn adjacency(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> =
            self.vertices.iter().map(|(id, _)| (*id, Vec::new())).collect();
        for e in &self.edges {
            adj.entry(e.u).or_default().push(e.v);
            adj.entry(e.v).or_default().push(e.u);
        }
        for list in adj.values_mut() {
            list.sort();
        }
        adj
    }

    pub fn is_edge(&self, a: NodeId, b: NodeId) -> bool {
        let (u, v) = (a.min(b), a.max(b));
        self.edges.iter().any(|e| e.u == u && e.v == v)
    }

    /// The unique simple path between two vertices.
    pub fn path_between(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        if !self.contains(from) || !self.contains(to) {
            return None;
        }
        let adj = self.adjacency();
        let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(x) = queue.pop_front() {
            if x == to {
                break;
            }
            for &y in &adj[&x] {
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(y) {
                    e.insert(x);
                    queue.push_back(y);
                }
            }
        }
        prev.get(&to)?;
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[&cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Replaces vertex `old` by `new` (now at `pos`) keeping every edge.
    /// Edge lengths are refreshed from the new position.
    pub fn rename(&mut self, old: NodeId, new: NodeId, pos: Vec2) -> bool {
        if !self.contains(old) || (old != new && self.contains(new)) {
            return false;
        }
        for v in &mut self.vertices {
            if v.0 == old {
                *v = (new, pos);
            }
        }
        self.vertices.sort_by_key(|(id, _)| *id);
        let positions: BTreeMap<NodeId, Vec2> = self.vertices.iter().copied().collect();
        for e in &mut self.edges {
            let (a, b) = (if e.u == old { new } else { e.u }, if e.v == old { new } else { e.v });
            *e = TreeEdge::new(a, b, positions[&a].dist(positions[&b]));
        }
        if self.root == Some(old) {
            self.root = Some(new);
        }
        true
    }

    /// Writes `u,v,length` rows.
    pub fn write_edges_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v", "length"])?;
        for e in &self.edges {
            w.write_record([e.u.to_string(), e.v.to_string(), e.length.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutePath {
    /// Source node, the supervisors in tree order, destination node.
    pub hops: Vec<NodeId>,
    /// One entry per hop (`hops.len() - 1`), filled in by power control.
    pub hop_levels: Vec<Option<Level>>,
}

impl RoutePath {
    pub fn new(hops: Vec<NodeId>) -> Self {
        let n = hops.len().saturating_sub(1);
        RoutePath { hops, hop_levels: vec![None; n] }
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len().saturating_sub(1)
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.hops.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn hops_string(&self) -> String {
        self.hops.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
    }
}

/// Source → its cell supervisor → tree path → destination's cell supervisor
/// → destination. Attachment hops collapse when an endpoint is itself the
/// supervisor.
pub fn route_path(
    tree: &SupervisorTree,
    src: (NodeId, CellIndex),
    dst: (NodeId, CellIndex),
    rosters: &BTreeMap<CellIndex, CellRoster>,
) -> Result<RoutePath> {
    let no_route = |reason| Error::NoRoute { src: src.0, dst: dst.0, reason };
    let sup_of = |cell: CellIndex| rosters.get(&cell).and_then(|r| r.supervisor);
    let s = sup_of(src.1).ok_or_else(|| no_route("source cell has no supervisor"))?;
    let d = sup_of(dst.1).ok_or_else(|| no_route("destination cell has no supervisor"))?;
    let middle = tree
        .path_between(s, d)
        .ok_or_else(|| no_route("endpoint supervisor missing from tree"))?;

    let mut hops = Vec::with_capacity(middle.len() + 2);
    hops.push(src.0);
    hops.extend(middle);
    hops.push(dst.0);
    hops.dedup();
    Ok(RoutePath::new(hops))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub root: NodeId,
    /// Oriented parent → child.
    pub edges: Vec<(NodeId, NodeId)>,
    pub depth: usize,
}

/// Splits the tree, rooted at `root`, into chained subtrees of depth at most
/// `max_depth`.
///
/// A vertex at depth `k·max_depth` with children roots a new segment; that
/// vertex is also a deepest-layer vertex of the segment above it, which is
/// how consecutive segments chain. Every tree edge lands in exactly one
/// segment.
pub fn segment_tree(tree: &SupervisorTree, root: NodeId, max_depth: usize) -> Vec<Segment> {
    assert!(max_depth > 0, "segment depth must be positive");
    if !tree.contains(root) {
        return Vec::new();
    }
    let adj = tree.adjacency();
    // BFS gives parents, depths, and a deterministic visiting order.
    let mut depth: BTreeMap<NodeId, usize> = BTreeMap::from([(root, 0)]);
    let mut order = vec![root];
    let mut head = 0;
    while head < order.len() {
        let x = order[head];
        head += 1;
        for &y in &adj[&x] {
            if !depth.contains_key(&y) {
                depth.insert(y, depth[&x] + 1);
                order.push(y);
            }
        }
    }

    let mut seg_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut segments = vec![Segment { root, edges: Vec::new(), depth: 0 }];
    seg_of.insert(root, 0);
    for &x in &order {
        let dx = depth[&x];
        let children: Vec<NodeId> = adj[&x].iter().copied().filter(|y| depth[y] == dx + 1).collect();
        if children.is_empty() {
            continue;
        }
        let seg = if dx > 0 && dx.is_multiple_of(max_depth) {
            segments.push(Segment { root: x, edges: Vec::new(), depth: 0 });
            segments.len() - 1
        } else {
            seg_of[&x]
        };
        let base = depth[&segments[seg].root];
        for y in children {
            segments[seg].edges.push((x, y));
            segments[seg].depth = segments[seg].depth.max(dx + 1 - base);
            seg_of.insert(y, seg);
        }
    }
    segments
}
