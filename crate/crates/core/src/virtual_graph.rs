//! Virtual graphs: real nodes (one per live processor), virtual helper nodes
//! each simulated by exactly one real node, and de-simulation to the real
//! network through the homomorphism `H(v) = Processor(v)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Identifier of a virtual node.
#[derive(
    Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Vid(pub u64);

impl fmt::Display for Vid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node of the virtual graph.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VNodeId {
    Real(NodeId),
    Virtual(Vid),
}

impl fmt::Display for VNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VNodeId::Real(p) => write!(f, "r{p}"),
            VNodeId::Virtual(v) => write!(f, "v{v}"),
        }
    }
}

/// Normalized unordered pair of virtual-graph nodes.
pub type VEdge = (VNodeId, VNodeId);

pub fn vedge(a: VNodeId, b: VNodeId) -> VEdge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Monotone source of fresh [`Vid`]s.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VidAllocator {
    next: u64,
}

impl VidAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u64) -> Self {
        VidAllocator { next }
    }

    pub fn fresh(&mut self) -> Vid {
        let v = Vid(self.next);
        self.next += 1;
        v
    }

    pub fn peek(&self) -> u64 {
        self.next
    }

    fn bump_past(&mut self, v: Vid) {
        self.next = self.next.max(v.0 + 1);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VirtualGraphError {
    #[error("real node {0} already present")]
    DuplicateReal(NodeId),
    #[error("virtual node {0} already present")]
    DuplicateVirtual(Vid),
    #[error("unknown simulator {0}")]
    UnknownSimulator(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(VNodeId),
    #[error("self-loop at {0}")]
    SelfLoop(VNodeId),
}

/// Machine-readable audit finding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl Violation {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Violation {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// For each removed node, its surviving former neighbors.
pub type OrphanReport = BTreeMap<VNodeId, BTreeSet<VNodeId>>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VirtualGraph {
    reals: BTreeSet<NodeId>,
    sim: BTreeMap<Vid, NodeId>,
    adj: BTreeMap<VNodeId, BTreeSet<VNodeId>>,
    vids: VidAllocator,
}

impl VirtualGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zero virtual nodes; edges copied from `g`.
    pub fn from_graph(g: &Graph) -> Self {
        let mut vg = VirtualGraph::new();
        for p in g.nodes() {
            vg.add_real_node(p).expect("graph nodes are unique");
        }
        for (u, v) in g.edges() {
            vg.add_edge(VNodeId::Real(u), VNodeId::Real(v))
                .expect("graph edges are valid");
        }
        vg
    }

    /// Assembles a virtual graph without validating it. [`Self::audit`]
    /// reports whatever is inconsistent.
    pub fn from_raw_parts(
        reals: BTreeSet<NodeId>,
        sim: BTreeMap<Vid, NodeId>,
        edges: impl IntoIterator<Item = VEdge>,
    ) -> Self {
        let mut adj: BTreeMap<VNodeId, BTreeSet<VNodeId>> = BTreeMap::new();
        for &p in &reals {
            adj.entry(VNodeId::Real(p)).or_default();
        }
        for &v in sim.keys() {
            adj.entry(VNodeId::Virtual(v)).or_default();
        }
        for (a, b) in edges {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        let next = sim.keys().next_back().map_or(0, |v| v.0 + 1);
        VirtualGraph {
            reals,
            sim,
            adj,
            vids: VidAllocator::starting_at(next),
        }
    }

    pub fn add_real_node(&mut self, p: NodeId) -> Result<(), VirtualGraphError> {
        if !self.reals.insert(p) {
            return Err(VirtualGraphError::DuplicateReal(p));
        }
        self.adj.insert(VNodeId::Real(p), BTreeSet::new());
        Ok(())
    }

    /// Creates a fresh virtual node simulated by `simulator`.
    pub fn add_virtual_node(&mut self, simulator: NodeId) -> Result<Vid, VirtualGraphError> {
        if !self.reals.contains(&simulator) {
            return Err(VirtualGraphError::UnknownSimulator(simulator));
        }
        let vid = self.vids.fresh();
        self.sim.insert(vid, simulator);
        self.adj.insert(VNodeId::Virtual(vid), BTreeSet::new());
        Ok(vid)
    }

    /// Inserts a virtual node under an externally allocated id.
    pub fn insert_virtual_node(&mut self, vid: Vid, simulator: NodeId) -> Result<(), VirtualGraphError> {
        if !self.reals.contains(&simulator) {
            return Err(VirtualGraphError::UnknownSimulator(simulator));
        }
        if self.sim.contains_key(&vid) {
            return Err(VirtualGraphError::DuplicateVirtual(vid));
        }
        self.vids.bump_past(vid);
        self.sim.insert(vid, simulator);
        self.adj.insert(VNodeId::Virtual(vid), BTreeSet::new());
        Ok(())
    }

    /// Removes a virtual node and its incident edges.
    pub fn remove_virtual_node(&mut self, vid: Vid) -> Result<BTreeSet<VNodeId>, VirtualGraphError> {
        if self.sim.remove(&vid).is_none() {
            return Err(VirtualGraphError::UnknownNode(VNodeId::Virtual(vid)));
        }
        Ok(self.detach(VNodeId::Virtual(vid)))
    }

    fn detach(&mut self, x: VNodeId) -> BTreeSet<VNodeId> {
        let nbrs = self.adj.remove(&x).unwrap_or_default();
        for y in &nbrs {
            if let Some(s) = self.adj.get_mut(y) {
                s.remove(&x);
            }
        }
        nbrs
    }

    pub fn contains(&self, x: VNodeId) -> bool {
        match x {
            VNodeId::Real(p) => self.reals.contains(&p),
            VNodeId::Virtual(v) => self.sim.contains_key(&v),
        }
    }

    pub fn add_edge(&mut self, a: VNodeId, b: VNodeId) -> Result<bool, VirtualGraphError> {
        if a == b {
            return Err(VirtualGraphError::SelfLoop(a));
        }
        for x in [a, b] {
            if !self.contains(x) {
                return Err(VirtualGraphError::UnknownNode(x));
            }
        }
        let fresh = self.adj.get_mut(&a).expect("checked").insert(b);
        self.adj.get_mut(&b).expect("checked").insert(a);
        Ok(fresh)
    }

    pub fn remove_edge(&mut self, a: VNodeId, b: VNodeId) -> bool {
        let had = self.adj.get_mut(&a).is_some_and(|s| s.remove(&b));
        if had {
            if let Some(s) = self.adj.get_mut(&b) {
                s.remove(&a);
            }
        }
        had
    }

    pub fn has_edge(&self, a: VNodeId, b: VNodeId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Deletes processor `p`: its real node and every virtual node it
    /// simulates, with all incident edges.
    pub fn remove_processor(&mut self, p: NodeId) -> Result<OrphanReport, VirtualGraphError> {
        if !self.reals.remove(&p) {
            return Err(VirtualGraphError::UnknownNode(VNodeId::Real(p)));
        }
        let mut doomed = vec![VNodeId::Real(p)];
        doomed.extend(self.simulated_by(p).into_iter().map(VNodeId::Virtual));
        for x in &doomed {
            if let VNodeId::Virtual(v) = x {
                self.sim.remove(v);
            }
        }
        let doomed_set: BTreeSet<VNodeId> = doomed.iter().copied().collect();
        let mut report = OrphanReport::new();
        for x in doomed {
            let nbrs = self.detach(x);
            report.insert(
                x,
                nbrs.into_iter().filter(|y| !doomed_set.contains(y)).collect(),
            );
        }
        Ok(report)
    }

    pub fn reals(&self) -> &BTreeSet<NodeId> {
        &self.reals
    }

    pub fn virtuals(&self) -> impl Iterator<Item = (Vid, NodeId)> + '_ {
        self.sim.iter().map(|(&v, &p)| (v, p))
    }

    pub fn virtual_count(&self) -> usize {
        self.sim.len()
    }

    pub fn simulator(&self, vid: Vid) -> Option<NodeId> {
        self.sim.get(&vid).copied()
    }

    pub fn simulated_by(&self, p: NodeId) -> Vec<Vid> {
        self.sim
            .iter()
            .filter(|(_, &s)| s == p)
            .map(|(&v, _)| v)
            .collect()
    }

    /// `H(x)`: the processor a node maps to, if its simulator is known.
    pub fn processor(&self, x: VNodeId) -> Option<NodeId> {
        match x {
            VNodeId::Real(p) => Some(p),
            VNodeId::Virtual(v) => self.simulator(v),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = VNodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, x: VNodeId) -> Option<&BTreeSet<VNodeId>> {
        self.adj.get(&x)
    }

    pub fn degree(&self, x: VNodeId) -> usize {
        self.adj.get(&x).map_or(0, BTreeSet::len)
    }

    pub fn edges(&self) -> impl Iterator<Item = VEdge> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, s)| s.range(a..).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Breadth-first distances between virtual-graph nodes.
    pub fn bfs(&self, src: VNodeId) -> BTreeMap<VNodeId, u32> {
        let mut dist = BTreeMap::new();
        if !self.adj.contains_key(&src) {
            return dist;
        }
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x] + 1;
            for &y in &self.adj[&x] {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(y) {
                    e.insert(d);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// The homomorphic image: virtual nodes collapse onto their simulators,
    /// self-loops vanish and parallel images merge.
    pub fn de_simulate(&self) -> Graph {
        let mut g = Graph::new();
        for &p in &self.reals {
            g.add_node(p).expect("reals are unique");
        }
        for (a, b) in self.edges() {
            let (Some(x), Some(y)) = (self.processor(a), self.processor(b)) else {
                continue;
            };
            if x != y && g.contains(x) && g.contains(y) {
                g.add_edge(x, y).expect("both endpoints present");
            }
        }
        g
    }

    pub fn audit(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (&v, &p) in &self.sim {
            if !self.reals.contains(&p) {
                out.push(Violation::new(
                    "dangling-simulator",
                    format!("virtual {v} simulated by absent processor {p}"),
                ));
            }
            if !self.adj.contains_key(&VNodeId::Virtual(v)) {
                out.push(Violation::new("missing-node", format!("virtual {v} has no adjacency")));
            }
        }
        for &p in &self.reals {
            if !self.adj.contains_key(&VNodeId::Real(p)) {
                out.push(Violation::new("missing-node", format!("real {p} has no adjacency")));
            }
        }
        for (&a, nbrs) in &self.adj {
            if !self.contains(a) {
                out.push(Violation::new("dangling-edge", format!("adjacency for absent node {a}")));
            }
            for &b in nbrs {
                if a == b {
                    out.push(Violation::new("self-loop", format!("self-loop at {a}")));
                } else if !self.contains(b) {
                    out.push(Violation::new("dangling-edge", format!("edge {a}-{b} to absent node")));
                } else if !self.has_edge(b, a) {
                    out.push(Violation::new("asymmetric-edge", format!("edge {a}->{b}")));
                }
            }
        }
        out
    }

    /// Graphviz export: real nodes as circles, virtual nodes as triangles
    /// labeled `vid/simulator`.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("graph {name} {{\n");
        for &p in &self.reals {
            out.push_str(&format!("  \"r{p}\" [shape=circle,label=\"{p}\"];\n"));
        }
        for (&v, &p) in &self.sim {
            out.push_str(&format!("  \"v{v}\" [shape=triangle,label=\"{v}/{p}\"];\n"));
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("  \"{a}\" -- \"{b}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}
