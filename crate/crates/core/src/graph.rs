//! Undirected simple graphs over processor identifiers.
//!
//! Both the healed network `G_t` and the shadow graph `G'_t` are stored as a
//! [`Graph`]. Adjacency lives in ordered maps so every traversal, export and
//! tie-break is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a processor. Never reused within a run.
#[derive(
    Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for NodeId {
    fn from(v: u64) -> Self {
        NodeId(v)
    }
}

/// A hop count, or infinity when no path exists.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hops {
    Finite(u32),
    Infinite,
}

impl Hops {
    pub fn finite(self) -> Option<u32> {
        match self {
            Hops::Finite(h) => Some(h),
            Hops::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Hops::Finite(_))
    }
}

impl fmt::Display for Hops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hops::Finite(h) => write!(f, "{h}"),
            Hops::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Hops {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(Hops::Infinite)
        } else {
            s.parse().map(Hops::Finite)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} already present")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Outcome of [`Graph::add_edge`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EdgeInsert {
    Added,
    AlreadyPresent,
}

/// Undirected simple graph. Symmetric adjacency, no self-loops, no parallel
/// edges; the key set of the adjacency map is the node set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// Normalizes an undirected edge so the smaller endpoint comes first.
pub fn edge(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from an edge list, creating endpoints as needed.
    pub fn from_edges<I>(edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let mut g = Graph::new();
        for (u, v) in edges {
            let (u, v) = (NodeId(u), NodeId(v));
            g.ensure_node(u);
            g.ensure_node(v);
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, v: NodeId) -> Result<(), GraphError> {
        if self.adj.contains_key(&v) {
            return Err(GraphError::DuplicateNode(v));
        }
        self.adj.insert(v, BTreeSet::new());
        Ok(())
    }

    /// Adds `v` if absent; returns whether it was added.
    pub fn ensure_node(&mut self, v: NodeId) -> bool {
        if let std::collections::btree_map::Entry::Vacant(e) = self.adj.entry(v) {
            e.insert(BTreeSet::new());
            true
        } else {
            false
        }
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<EdgeInsert, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        for x in [u, v] {
            if !self.adj.contains_key(&x) {
                return Err(GraphError::UnknownNode(x));
            }
        }
        let fresh = self.adj.get_mut(&u).expect("checked").insert(v);
        self.adj.get_mut(&v).expect("checked").insert(u);
        Ok(if fresh {
            EdgeInsert::Added
        } else {
            EdgeInsert::AlreadyPresent
        })
    }

    /// Removes an edge; returns whether it existed.
    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        let had = self.adj.get_mut(&u).is_some_and(|s| s.remove(&v));
        if had {
            if let Some(s) = self.adj.get_mut(&v) {
                s.remove(&u);
            }
        }
        had
    }

    /// Removes `v` and its incident edges, returning the former neighbors.
    pub fn remove_node(&mut self, v: NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        let nbrs = self.adj.remove(&v).ok_or(GraphError::UnknownNode(v))?;
        for u in &nbrs {
            if let Some(s) = self.adj.get_mut(u) {
                s.remove(&v);
            }
        }
        Ok(nbrs)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.get(&u).is_some_and(|s| s.contains(&v))
    }

    pub fn neighbors(&self, v: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.adj.get(&v)
    }

    pub fn degree(&self, v: NodeId) -> Option<usize> {
        self.adj.get(&v).map(BTreeSet::len)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as normalized `(smaller, larger)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&u, s)| s.range(u..).map(move |&v| (u, v)))
    }

    pub fn edge_set(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges().collect()
    }

    pub fn max_node_id(&self) -> Option<NodeId> {
        self.adj.keys().next_back().copied()
    }

    /// Checks symmetry and the absence of self-loops.
    pub fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (&u, nbrs) in &self.adj {
            for &v in nbrs {
                if u == v {
                    out.push(format!("self-loop at {u}"));
                } else if !self.has_edge(v, u) {
                    out.push(format!("asymmetric edge {u}->{v}"));
                }
            }
        }
        out
    }

    /// Breadth-first distances from `src` to every reachable node.
    pub fn bfs(&self, src: NodeId) -> Result<BTreeMap<NodeId, u32>, GraphError> {
        if !self.contains(src) {
            return Err(GraphError::UnknownNode(src));
        }
        let mut dist = BTreeMap::new();
        dist.insert(src, 0u32);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &w in &self.adj[&u] {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Empty and singleton graphs count as connected.
    pub fn is_connected(&self) -> bool {
        match self.adj.keys().next() {
            None => true,
            Some(&first) => self.bfs(first).map(|d| d.len()).unwrap_or(0) == self.node_count(),
        }
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> Result<Hops, GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownNode(v));
        }
        if u == v && self.contains(u) {
            return Ok(Hops::Finite(0));
        }
        Ok(self
            .bfs(u)?
            .get(&v)
            .map_or(Hops::Infinite, |&d| Hops::Finite(d)))
    }

    /// Exact diameter by all-sources breadth-first search. Zero for ≤ 1 node.
    pub fn diameter(&self) -> Hops {
        self.indexed().diameter_from(0..self.node_count())
    }

    /// Dense-index view for repeated traversals.
    pub fn indexed(&self) -> IndexedGraph {
        IndexedGraph::new(self)
    }

    /// Connected cut vertices in ascending order.
    pub fn articulation_points(&self) -> BTreeSet<NodeId> {
        let ig = self.indexed();
        let n = ig.len();
        let mut disc = vec![u32::MAX; n];
        let mut low = vec![0u32; n];
        let mut out = BTreeSet::new();
        let mut timer = 0u32;
        for root in 0..n {
            if disc[root] != u32::MAX {
                continue;
            }
            // (node, parent, next neighbor offset)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            let mut root_children = 0;
            while let Some(top) = stack.last_mut() {
                let (u, parent, next) = *top;
                let nbrs = ig.neighbors(u);
                if next < nbrs.len() {
                    top.2 += 1;
                    let w = nbrs[next] as usize;
                    if disc[w] == u32::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        if u == root {
                            root_children += 1;
                        }
                        stack.push((w, u, 0));
                    } else if w != parent {
                        low[u] = low[u].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if p != root && low[u] >= disc[p] {
                            out.insert(ig.id(p));
                        }
                    }
                }
            }
            if root_children > 1 {
                out.insert(ig.id(root));
            }
        }
        out
    }

    /// Parses the edge-list text format: one `u v` pair per line, `#`
    /// comments. A line holding a single identifier declares an isolated node.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut g = Graph::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<u64>().map(NodeId).map_err(|e| GraphError::Parse {
                    line: i + 1,
                    reason: format!("bad identifier {tok:?}: {e}"),
                })
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [a] => {
                    g.ensure_node(parse(a)?);
                }
                [a, b] => {
                    let (u, v) = (parse(a)?, parse(b)?);
                    g.ensure_node(u);
                    g.ensure_node(v);
                    g.add_edge(u, v).map_err(|e| GraphError::Parse {
                        line: i + 1,
                        reason: e.to_string(),
                    })?;
                }
                _ => {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        reason: format!("expected `u v`, got {line:?}"),
                    })
                }
            }
        }
        Ok(g)
    }

    /// Writes the edge-list format. Isolated nodes are emitted as single ids.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        for (&u, nbrs) in &self.adj {
            if nbrs.is_empty() {
                out.push_str(&format!("{u}\n"));
            }
        }
        out
    }

    /// Graphviz export of the live graph.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("graph {name} {{\n");
        for u in self.nodes() {
            out.push_str(&format!("  \"{u}\" [shape=circle];\n"));
        }
        for (u, v) in self.edges() {
            out.push_str(&format!("  \"{u}\" -- \"{v}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Compressed adjacency with nodes renumbered `0..n` in ascending id order.
#[derive(Clone, Debug)]
pub struct IndexedGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, u32>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

/// Marker for unreachable entries in [`IndexedGraph::bfs`] output.
pub const UNREACHABLE: u32 = u32::MAX;

impl IndexedGraph {
    fn new(g: &Graph) -> Self {
        let ids: Vec<NodeId> = g.nodes().collect();
        let index: HashMap<NodeId, u32> =
            ids.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let mut offsets = Vec::with_capacity(ids.len() + 1);
        let mut targets = Vec::with_capacity(g.edge_count() * 2);
        offsets.push(0);
        for v in &ids {
            targets.extend(g.adj[v].iter().map(|w| index[w]));
            offsets.push(targets.len());
        }
        IndexedGraph {
            ids,
            index,
            offsets,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> NodeId {
        self.ids[i]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, v: NodeId) -> Option<usize> {
        self.index.get(&v).map(|&i| i as usize)
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Distances from `src` by index; [`UNREACHABLE`] marks missing paths.
    pub fn bfs(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.len()];
        let mut queue = VecDeque::with_capacity(self.len());
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u] + 1;
            for &w in self.neighbors(u) {
                let w = w as usize;
                if dist[w] == UNREACHABLE {
                    dist[w] = d;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Maximum eccentricity over the given sources; infinite if any source
    /// fails to reach some node.
    pub fn diameter_from<I: IntoIterator<Item = usize>>(&self, sources: I) -> Hops {
        let mut best = 0;
        for s in sources {
            for d in self.bfs(s) {
                if d == UNREACHABLE {
                    return Hops::Infinite;
                }
                best = best.max(d);
            }
        }
        Hops::Finite(best)
    }
}
